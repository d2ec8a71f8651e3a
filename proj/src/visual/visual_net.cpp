#include "affect/visual/visual_net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "affect/error.hpp"

namespace affect::visual {
namespace {

Tensor he_normal(Shape shape, double gain, Rng& rng) {
    const double fan_in = static_cast<double>(shape_numel(shape) / shape[0]);
    std::normal_distribution<double> dist(0.0, std::sqrt(gain / fan_in));
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = dist(rng);
    return Tensor::from(std::move(shape), std::move(v), true);
}

bool needs_projection(std::size_t in_channels, const BottleneckSpec& spec, std::size_t stride) {
    return in_channels != spec.expand || stride != 1;
}

}  // namespace

VisualNetConfig VisualNetConfig::resnet50() {
    VisualNetConfig c;
    c.stages = {{3, 64, 64, 256}, {4, 128, 128, 512}, {6, 256, 256, 1024}, {3, 512, 512, 2048}};
    c.stage_strides = {1, 2, 2, 2};
    return c;
}

VisualNetConfig VisualNetConfig::tiny(std::size_t stem_channels) {
    if (stem_channels < 2 || stem_channels % 2 != 0) throw ConfigurationError("tiny stem width must be even and >= 2");
    VisualNetConfig c;
    const std::size_t s = stem_channels;
    c.stem_channels = s;
    c.stages = {{1, s / 2, s / 2, 2 * s}, {1, s, s, 4 * s}, {1, 2 * s, 2 * s, 8 * s}, {1, 4 * s, 4 * s, 16 * s}};
    c.stage_strides = {1, 2, 2, 2};
    c.scale = Scale::tiny;
    return c;
}

void VisualNetConfig::validate() const {
    if (stages.empty()) throw ConfigurationError("visual net needs at least one stage");
    if (stage_strides.size() != stages.size()) {
        throw ConfigurationError("stage_strides lists " + std::to_string(stage_strides.size()) + " entries for " +
                                 std::to_string(stages.size()) + " stages");
    }
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& s = stages[i];
        if (s.replication == 0 || s.reduce == 0 || s.spatial == 0 || s.expand == 0 || stage_strides[i] == 0) {
            throw ConfigurationError("stage " + std::to_string(i) + " has a zero replication, width or stride");
        }
    }
    if (input_channels == 0 || stem_channels == 0 || stem_kernel == 0 || stem_stride == 0 || pool_kernel == 0 ||
        pool_stride == 0 || output_features == 0) {
        throw ConfigurationError("visual net sizes must be positive");
    }
    if (input_size < stem_kernel) throw ConfigurationError("input smaller than the stem kernel");
}

Frame frame_from_bytes(std::span<const std::uint8_t> hwc, std::size_t height, std::size_t width) {
    if (hwc.size() != height * width * 3) throw DimensionError("frame bytes do not match " + std::to_string(height) + "x" + std::to_string(width) + "x3");
    Frame f{height, width, std::vector<double>(hwc.size())};
    for (std::size_t i = 0; i < hwc.size(); ++i) f.pixels[i] = hwc[i] / 255.0;
    return f;
}

Tensor frame_tensor(const Frame& frame) {
    if (frame.pixels.size() != frame.height * frame.width * 3) throw DimensionError("frame pixel buffer does not match its size");
    const std::size_t plane = frame.height * frame.width;
    std::vector<double> chw(3 * plane);
    for (std::size_t p = 0; p < plane; ++p)
        for (std::size_t c = 0; c < 3; ++c) chw[c * plane + p] = frame.pixels[p * 3 + c];
    return Tensor::from({3, frame.height, frame.width}, std::move(chw));
}

BottleneckBlock BottleneckBlock::init(std::size_t in_channels, const BottleneckSpec& spec, std::size_t stride, Rng& rng) {
    BottleneckBlock b;
    b.in_channels = in_channels;
    b.stride = stride;
    b.reduce = he_normal({spec.reduce, in_channels, 1, 1}, 2.0, rng);
    b.spatial = he_normal({spec.spatial, spec.reduce, 3, 3}, 2.0, rng);
    b.expand = he_normal({spec.expand, spec.spatial, 1, 1}, 1.0, rng);
    if (needs_projection(in_channels, spec, stride)) b.shortcut = he_normal({spec.expand, in_channels, 1, 1}, 1.0, rng);
    return b;
}

std::vector<Tensor> BottleneckBlock::parameters() const {
    std::vector<Tensor> p{reduce, spatial, expand};
    if (shortcut.defined()) p.push_back(shortcut);
    return p;
}

Tensor residual_block(const Tensor& x, const BottleneckBlock& block) {
    if (x.rank() != 3 || x.dim(0) != block.in_channels) {
        throw DimensionError("residual block expects " + std::to_string(block.in_channels) + " input channels, got " +
                             shape_string(x.shape()));
    }
    if (block.identity_shortcut() && block.out_channels() != block.in_channels) {
        throw DimensionError("identity shortcut cannot map " + std::to_string(block.in_channels) + " channels to " +
                             std::to_string(block.out_channels()));
    }
    Tensor h = half_wave_rectify(conv2d(x, block.reduce, 1, Pad2d{}));
    h = half_wave_rectify(conv2d(h, block.spatial, block.stride, Pad2d::uniform(1)));
    Tensor f = conv2d(h, block.expand, 1, Pad2d{});
    Tensor s = block.identity_shortcut() ? x : conv2d(x, block.shortcut, block.stride, Pad2d{});
    if (s.shape() != f.shape()) {
        throw DimensionError("residual branch " + shape_string(f.shape()) + " and shortcut " + shape_string(s.shape()) +
                             " disagree");
    }
    return add(f, s);
}

VisualNet VisualNet::build(const VisualNetConfig& config, Rng& rng) {
    config.validate();
    VisualNet net;
    net.config_ = config;
    net.stem_ = he_normal({config.stem_channels, config.input_channels, config.stem_kernel, config.stem_kernel}, 2.0, rng);
    std::size_t channels = config.stem_channels;
    for (std::size_t i = 0; i < config.stages.size(); ++i) {
        const auto& spec = config.stages[i];
        std::vector<BottleneckBlock> blocks;
        for (std::size_t r = 0; r < spec.replication; ++r) {
            blocks.push_back(BottleneckBlock::init(channels, spec, r == 0 ? config.stage_strides[i] : 1, rng));
            channels = spec.expand;
        }
        net.stages_.push_back(std::move(blocks));
    }
    net.projection_ = he_normal({config.output_features, channels}, 1.0, rng);
    net.projection_bias_ = Tensor::zeros({config.output_features}, true);
    return net;
}

VisualNet VisualNet::from_parameters(const VisualNetConfig& config, std::span<const Tensor> params) {
    Rng rng(0);
    VisualNet net = build(config, rng);
    auto slots = net.parameters();
    if (slots.size() != params.size()) {
        throw DimensionError("visual net expects " + std::to_string(slots.size()) + " parameter tensors, got " +
                             std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].shape() != params[i].shape()) {
            throw DimensionError("visual parameter " + std::to_string(i) + " has shape " + shape_string(params[i].shape()) +
                                 ", expected " + shape_string(slots[i].shape()));
        }
        auto dst = slots[i].mutable_data();
        std::copy(params[i].data().begin(), params[i].data().end(), dst.begin());
    }
    return net;
}

std::vector<Tensor> VisualNet::parameters() const {
    std::vector<Tensor> p{stem_};
    for (const auto& stage : stages_)
        for (const auto& b : stage) {
            auto bp = b.parameters();
            p.insert(p.end(), bp.begin(), bp.end());
        }
    p.push_back(projection_);
    p.push_back(projection_bias_);
    return p;
}

Tensor VisualNet::trunk(const Tensor& image) const {
    const auto& c = config_;
    if (image.shape() != Shape{c.input_channels, c.input_size, c.input_size}) {
        throw DimensionError("visual net expects " +
                             shape_string({c.input_channels, c.input_size, c.input_size}) + " input, got " +
                             shape_string(image.shape()));
    }
    Tensor h = half_wave_rectify(conv2d(image, stem_, c.stem_stride, Pad2d::uniform(c.stem_kernel / 2)));
    h = max_pool2d(h, c.pool_kernel, c.pool_stride, c.pool_kernel / 2);
    for (const auto& stage : stages_)
        for (const auto& b : stage) h = residual_block(h, b);
    return global_avg_pool(h);
}

Tensor VisualNet::forward_frame(const Tensor& image) const {
    return linear(trunk(image), projection_, projection_bias_);
}

Tensor VisualNet::forward_frame(const Frame& frame) const { return forward_frame(frame_tensor(frame)); }

void VisualNet::calibrate_projection(std::span<const Frame> frames) {
    if (frames.size() < 2) throw DegenerateInputError("projection calibration needs at least two frames");
    const std::size_t out = config_.output_features, in = projection_.dim(1);
    std::vector<double> sum(out, 0.0), sq(out, 0.0);
    for (const Frame& f : frames) {
        const Tensor y = forward_frame(f);
        for (std::size_t j = 0; j < out; ++j) {
            sum[j] += y[j];
            sq[j] += y[j] * y[j];
        }
    }
    const double n = static_cast<double>(frames.size());
    auto w = projection_.mutable_data();
    auto b = projection_bias_.mutable_data();
    for (std::size_t j = 0; j < out; ++j) {
        const double mu = sum[j] / n;
        const double var = std::max(0.0, sq[j] / n - mu * mu);
        const double sd = std::sqrt(var);
        const double inv = sd > 1e-12 * (1.0 + std::abs(mu)) ? 1.0 / sd : 1.0;
        for (std::size_t k = 0; k < in; ++k) w[j * in + k] *= inv;
        b[j] = (b[j] - mu) * inv;
    }
}

Frame resize_bilinear(const Frame& frame, std::size_t height, std::size_t width) {
    Frame out{height, width, std::vector<double>(height * width * 3)};
    const double sy = static_cast<double>(frame.height) / static_cast<double>(height);
    const double sx = static_cast<double>(frame.width) / static_cast<double>(width);
    for (std::size_t y = 0; y < height; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(frame.height - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, frame.height - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(frame.width - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, frame.width - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t c = 0; c < 3; ++c) {
                const double top = frame.at(y0, x0, c) * (1 - wx) + frame.at(y0, x1, c) * wx;
                const double bottom = frame.at(y1, x0, c) * (1 - wx) + frame.at(y1, x1, c) * wx;
                out.pixels[(y * width + x) * 3 + c] = top * (1 - wy) + bottom * wy;
            }
        }
    }
    return out;
}

AugmentParams identity_augment(const AugmentConfig& config) {
    const std::size_t off = (config.resize - config.crop) / 2;
    return {off, off, 0.0, 1.0};
}

Frame apply_augment(const Frame& frame, const AugmentParams& p, const AugmentConfig& config) {
    if (config.crop > config.resize) throw ParameterError("crop larger than the resized frame");
    if (p.crop_y + config.crop > config.resize || p.crop_x + config.crop > config.resize) {
        throw ParameterError("crop window leaves the resized frame");
    }
    const Frame big = resize_bilinear(frame, config.resize, config.resize);
    Frame out{config.crop, config.crop, std::vector<double>(config.crop * config.crop * 3)};
    for (std::size_t y = 0; y < config.crop; ++y) {
        for (std::size_t x = 0; x < config.crop; ++x) {
            double rgb[3];
            for (std::size_t c = 0; c < 3; ++c) rgb[c] = big.at(p.crop_y + y, p.crop_x + x, c) + p.brightness;
            const double gray = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
            for (std::size_t c = 0; c < 3; ++c) {
                out.pixels[(y * config.crop + x) * 3 + c] = std::clamp(gray + p.saturation * (rgb[c] - gray), 0.0, 1.0);
            }
        }
    }
    return out;
}

AugmentParams draw_augment(Rng& rng, const AugmentConfig& config) {
    std::uniform_int_distribution<std::size_t> offset(0, config.resize - config.crop);
    std::uniform_real_distribution<double> bright(-config.brightness, config.brightness);
    std::uniform_real_distribution<double> sat(config.saturation_low, config.saturation_high);
    AugmentParams p;
    p.crop_y = offset(rng);
    p.crop_x = offset(rng);
    p.brightness = bright(rng);
    p.saturation = sat(rng);
    return p;
}

Frame augment(const Frame& frame, Rng& rng, const AugmentConfig& config) {
    return apply_augment(frame, draw_augment(rng, config), config);
}

}  // namespace affect::visual
