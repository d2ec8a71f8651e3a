#include "affect/speech/speech_net.hpp"

#include <cmath>
#include <string>

#include "affect/error.hpp"

namespace affect::speech {

SpeechNetConfig SpeechNetConfig::tiny() {
    SpeechNetConfig c;
    c.filters_1 = 4;
    c.kernel_1 = 80;
    c.filters_2 = 8;
    c.kernel_2 = 40;
    c.channel_pool = 2;
    return c;
}

void SpeechNetConfig::validate() const {
    if (filters_1 == 0 || filters_2 == 0 || kernel_1 == 0 || kernel_2 == 0 || time_pool == 0 || channel_pool == 0) {
        throw ConfigurationError("speech net sizes must be positive");
    }
    if (filters_2 % channel_pool != 0) {
        throw ConfigurationError("filters_2 (" + std::to_string(filters_2) + ") not divisible by channel_pool (" +
                                 std::to_string(channel_pool) + ")");
    }
    if (sample_rate % time_pool != 0 || (sample_rate / time_pool * frame_ms) % 1000 != 0) {
        throw ConfigurationError("pooled rate does not give a whole number of steps per frame");
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigurationError("dropout_p must lie in [0, 1)");
    const double samples = segment_seconds * static_cast<double>(sample_rate);
    if (!(samples > 0) || samples != std::floor(samples)) {
        throw ConfigurationError("segment length is not a whole number of samples");
    }
    frame_count(*this);
}

std::size_t SpeechNetConfig::segment_samples() const {
    return static_cast<std::size_t>(std::llround(segment_seconds * static_cast<double>(sample_rate)));
}

std::size_t SpeechNetConfig::samples_per_frame() const { return sample_rate * frame_ms / 1000; }

std::size_t SpeechNetConfig::steps_per_frame() const { return samples_per_frame() / time_pool; }

std::size_t frame_count(double seconds, std::size_t frame_ms) {
    if (frame_ms == 0) throw ConfigurationError("frame length must be positive");
    const double frames = seconds * 1000.0 / static_cast<double>(frame_ms);
    const double rounded = std::round(frames);
    if (!(rounded > 0) || std::abs(frames - rounded) > 1e-9) {
        throw ConfigurationError(std::to_string(seconds) + " s is not a whole number of " + std::to_string(frame_ms) +
                                 " ms frames");
    }
    return static_cast<std::size_t>(rounded);
}

std::size_t frame_count(const SpeechNetConfig& config) { return frame_count(config.segment_seconds, config.frame_ms); }

std::vector<double> normalize_segment(std::span<const double> raw, std::size_t expected) {
    if (expected != 0 && raw.size() != expected) {
        throw DimensionError("segment holds " + std::to_string(raw.size()) + " samples, expected " + std::to_string(expected));
    }
    if (raw.empty()) throw DimensionError("empty segment");
    const double n = static_cast<double>(raw.size());
    double mean = 0.0;
    for (double v : raw) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : raw) var += (v - mean) * (v - mean);
    var /= n;
    if (!(var > 0.0)) throw DegenerateInputError("cannot normalize a constant segment");
    const double inv = 1.0 / std::sqrt(var);
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - mean) * inv;
    return out;
}

SpeechNet::SpeechNet(SpeechNetConfig config, Tensor kernels_1, Tensor kernels_2)
    : config_(config), kernels_1_(std::move(kernels_1)), kernels_2_(std::move(kernels_2)) {
    config_.validate();
    if (kernels_1_.shape() != Shape{config_.filters_1, 1, config_.kernel_1}) {
        throw DimensionError("first-layer kernels " + shape_string(kernels_1_.shape()) + " do not match config");
    }
    if (kernels_2_.shape() != Shape{config_.filters_2, config_.filters_1, config_.kernel_2}) {
        throw DimensionError("second-layer kernels " + shape_string(kernels_2_.shape()) + " do not match config");
    }
}

SpeechNet SpeechNet::init(const SpeechNetConfig& config, Rng& rng) {
    config.validate();
    auto normal = [&rng](Shape shape, double fan_in) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        std::vector<double> v(shape_numel(shape));
        for (double& x : v) x = dist(rng);
        return Tensor::from(std::move(shape), std::move(v), true);
    };
    Tensor k1 = normal({config.filters_1, 1, config.kernel_1}, static_cast<double>(config.kernel_1));
    Tensor k2 = normal({config.filters_2, config.filters_1, config.kernel_2},
                       static_cast<double>(config.filters_1 * config.kernel_2));
    return SpeechNet(config, std::move(k1), std::move(k2));
}

SpeechStages SpeechNet::forward_stages(std::span<const double> samples, bool training, Rng& rng) const {
    const std::size_t per_frame = config_.samples_per_frame();
    if (samples.empty() || samples.size() % per_frame != 0) {
        throw DimensionError("speech input of " + std::to_string(samples.size()) + " samples is not a whole number of " +
                             std::to_string(per_frame) + "-sample frames");
    }
    const std::size_t frames = samples.size() / per_frame;
    const std::size_t steps = config_.steps_per_frame();
    const std::size_t channels = config_.output_channels();

    SpeechStages s;
    Tensor input = Tensor::from({1, samples.size()}, std::vector<double>(samples.begin(), samples.end()));
    s.conv1 = conv1d(input, kernels_1_, 1, Padding::same);
    s.pooled = max_pool_time(half_wave_rectify(s.conv1), config_.time_pool);
    s.conv2 = conv1d(s.pooled, kernels_2_, 1, Padding::same);
    s.channels = dropout(max_pool_channels(s.conv2, config_.channel_pool), config_.dropout_p, training, rng);

    const std::size_t total = frames * steps;
    std::vector<std::size_t> index(frames * channels * steps);
    std::size_t k = 0;
    for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t t = 0; t < steps; ++t) index[k++] = c * total + f * steps + t;
    s.features = gather(s.channels, std::move(index), {frames, channels * steps});
    return s;
}

Tensor SpeechNet::forward(std::span<const double> samples, bool training, Rng& rng) const {
    return forward_stages(samples, training, rng).features;
}

}  // namespace affect::speech
