#pragma once

// Raw-waveform audio front-end: two temporal convolutions with rectification
// and pooling, channel max-pooling, dropout, then framing into 40 ms vectors.

#include <cstddef>
#include <span>
#include <vector>

#include "affect/tensor/ops.hpp"
#include "affect/tensor/tensor.hpp"

namespace affect::speech {

struct SpeechNetConfig {
    std::size_t sample_rate = 16000;
    double segment_seconds = 6.0;
    std::size_t filters_1 = 20;
    std::size_t kernel_1 = 80;
    std::size_t time_pool = 2;
    std::size_t filters_2 = 40;
    std::size_t kernel_2 = 4000;
    std::size_t channel_pool = 10;
    double dropout_p = 0.5;
    std::size_t frame_ms = 40;

    static SpeechNetConfig full() { return {}; }
    /// Same pipeline and framing with few filters and short kernels.
    static SpeechNetConfig tiny();

    /// Throws ConfigurationError for inconsistent settings.
    void validate() const;
    std::size_t segment_samples() const;
    /// Input samples covered by one output frame (640 at 16 kHz, 40 ms).
    std::size_t samples_per_frame() const;
    /// Time steps per frame after temporal pooling (320).
    std::size_t steps_per_frame() const;
    std::size_t output_channels() const { return filters_2 / channel_pool; }
    std::size_t features_per_frame() const { return output_channels() * steps_per_frame(); }
};

/// segment_seconds / frame length; throws ConfigurationError unless integral.
std::size_t frame_count(const SpeechNetConfig& config);
std::size_t frame_count(double seconds, std::size_t frame_ms);

/// (x - mean) / std with population std. `expected` of 0 skips the length check.
std::vector<double> normalize_segment(std::span<const double> raw, std::size_t expected = 0);

struct SpeechStages {
    Tensor conv1;     // [F x S]
    Tensor pooled;    // [F x S/2], the 8 kHz stage
    Tensor conv2;     // [M x S/2]
    Tensor channels;  // [M/pool x S/2]
    Tensor features;  // [frames x features_per_frame]
};

class SpeechNet {
public:
    SpeechNet() = default;
    SpeechNet(SpeechNetConfig config, Tensor kernels_1, Tensor kernels_2);

    /// He-scaled normal kernels.
    static SpeechNet init(const SpeechNetConfig& config, Rng& rng);

    const SpeechNetConfig& config() const { return config_; }
    const Tensor& kernels_1() const { return kernels_1_; }  // [F x 1 x K1]
    const Tensor& kernels_2() const { return kernels_2_; }  // [M x F x K2]
    std::vector<Tensor> parameters() const { return {kernels_1_, kernels_2_}; }

    /// Normalized samples, any whole number of frames -> [frames x features].
    Tensor forward(std::span<const double> samples, bool training, Rng& rng) const;
    SpeechStages forward_stages(std::span<const double> samples, bool training, Rng& rng) const;

private:
    SpeechNetConfig config_;
    Tensor kernels_1_;
    Tensor kernels_2_;
};

}  // namespace affect::speech
