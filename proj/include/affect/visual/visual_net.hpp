#pragma once

// Bottleneck residual network over 96x96 RGB face crops, projected to a
// fixed-width per-frame feature vector.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "affect/tensor/ops.hpp"
#include "affect/tensor/tensor.hpp"

namespace affect::visual {

struct BottleneckSpec {
    std::size_t replication = 1;
    std::size_t reduce = 0;  // 1x1 maps
    std::size_t spatial = 0; // 3x3 maps
    std::size_t expand = 0;  // 1x1 output maps

    bool operator==(const BottleneckSpec&) const = default;
};

enum class Scale { full, tiny };

struct VisualNetConfig {
    std::size_t input_size = 96;
    std::size_t input_channels = 3;
    std::size_t stem_channels = 64;
    std::size_t stem_kernel = 7;
    std::size_t stem_stride = 2;
    std::size_t pool_kernel = 3;
    std::size_t pool_stride = 2;
    std::vector<BottleneckSpec> stages;
    std::vector<std::size_t> stage_strides;
    std::size_t output_features = 640;
    Scale scale = Scale::full;

    static VisualNetConfig resnet50();
    /// Stem plus one bottleneck per stage with channel counts scaled to the stem width.
    static VisualNetConfig tiny(std::size_t stem_channels = 8);

    void validate() const;
    std::size_t pre_projection_features() const { return stages.back().expand; }
};

/// Pixels in [0, 1], row-major HWC.
struct Frame {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> pixels;

    double at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }
};

Frame frame_from_bytes(std::span<const std::uint8_t> hwc, std::size_t height, std::size_t width);
/// [3 x H x W] tensor view of a frame.
Tensor frame_tensor(const Frame& frame);

struct BottleneckBlock {
    std::size_t in_channels = 0;
    std::size_t stride = 1;
    Tensor reduce;    // [r x in x 1 x 1]
    Tensor spatial;   // [s x r x 3 x 3]
    Tensor expand;    // [e x s x 1 x 1]
    Tensor shortcut;  // [e x in x 1 x 1], undefined for identity

    static BottleneckBlock init(std::size_t in_channels, const BottleneckSpec& spec, std::size_t stride, Rng& rng);
    bool identity_shortcut() const { return !shortcut.defined(); }
    std::size_t out_channels() const { return expand.dim(0); }
    std::vector<Tensor> parameters() const;
};

/// y = F(x) + h(x): F is 1x1 -> 3x3 -> 1x1 with rectification between the
/// convolutions, h is identity or a strided 1x1 projection.
Tensor residual_block(const Tensor& x, const BottleneckBlock& block);

class VisualNet {
public:
    static VisualNet build(const VisualNetConfig& config, Rng& rng);

    const VisualNetConfig& config() const { return config_; }
    std::vector<Tensor> parameters() const;

    const Tensor& stem() const { return stem_; }
    const std::vector<std::vector<BottleneckBlock>>& stages() const { return stages_; }
    const Tensor& projection() const { return projection_; }
    const Tensor& projection_bias() const { return projection_bias_; }

    /// Input [3 x 96 x 96] -> pooled [pre_projection_features].
    Tensor trunk(const Tensor& image) const;
    /// Input [3 x 96 x 96] -> [output_features].
    Tensor forward_frame(const Tensor& image) const;
    Tensor forward_frame(const Frame& frame) const;

    /// Rescales the projection so every output feature has zero mean and
    /// unit variance over `frames`. Features that do not vary are only
    /// centred.
    void calibrate_projection(std::span<const Frame> frames);

    /// Rebuilds a network from a flat parameter list in parameters() order.
    static VisualNet from_parameters(const VisualNetConfig& config, std::span<const Tensor> params);

private:
    VisualNetConfig config_;
    Tensor stem_;
    std::vector<std::vector<BottleneckBlock>> stages_;
    Tensor projection_;
    Tensor projection_bias_;
};

struct AugmentConfig {
    std::size_t resize = 110;
    std::size_t crop = 96;
    double brightness = 0.125;
    double saturation_low = 0.5;
    double saturation_high = 1.5;
};

struct AugmentParams {
    std::size_t crop_y = 0;
    std::size_t crop_x = 0;
    double brightness = 0.0;
    double saturation = 1.0;
};

/// Half-pixel-centred bilinear resampling.
Frame resize_bilinear(const Frame& frame, std::size_t height, std::size_t width);
/// Crop offsets equal to the centre crop, zero brightness, unit saturation.
AugmentParams identity_augment(const AugmentConfig& config = {});
Frame apply_augment(const Frame& frame, const AugmentParams& params, const AugmentConfig& config = {});
AugmentParams draw_augment(Rng& rng, const AugmentConfig& config = {});
Frame augment(const Frame& frame, Rng& rng, const AugmentConfig& config = {});

}  // namespace affect::visual
