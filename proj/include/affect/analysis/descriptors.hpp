#pragma once

// Frame-level acoustic descriptors at the 40 ms annotation rate.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace affect::analysis {

struct DescriptorConfig {
    std::size_t sample_rate = 16000;
    std::size_t frame_samples = 640;
    std::size_t range_frames = 25;  // 1 s centred window
    double loudness_ref = 1e-3;
    double f0_min = 80.0;
    double f0_max = 400.0;
    double voicing_threshold = 0.3;
};

struct DescriptorFrame {
    double rms_energy = 0.0;
    double rms_range = 0.0;
    double loudness = 0.0;
    double f0 = 0.0;  // last voiced estimate (0 before the first one)
    bool voiced = false;
};

inline constexpr const char* kDescriptorNames[] = {"rms_energy", "rms_range", "loudness", "f0"};
inline constexpr std::size_t kDescriptorCount = 4;

/// One entry per whole frame; throws DataError when no whole frame exists.
std::vector<DescriptorFrame> compute_descriptors(std::span<const double> samples, const DescriptorConfig& config = {});

/// Column `index` of kDescriptorNames over all frames.
std::vector<double> descriptor_series(std::span<const DescriptorFrame> frames, std::size_t index);

struct PitchEstimate {
    double f0 = 0.0;
    double strength = 0.0;  // normalized autocorrelation at the chosen lag
};

/// Normalized autocorrelation pitch search over [f0_min, f0_max]; `window`
/// holds the frame followed by up to one maximum period of look-ahead.
PitchEstimate estimate_pitch(std::span<const double> window, std::size_t frame_samples, const DescriptorConfig& config = {});

}  // namespace affect::analysis
