#pragma once

// Synthetic recordings: smooth latent arousal/valence tracks rendered into a
// harmonic tone (arousal) and a schematic face (valence).

#include <cstdint>
#include <vector>

#include "affect/io/frames.hpp"

namespace affect::synth {

inline constexpr std::size_t kFrameRate = 25;
inline constexpr double kFrameSeconds = 0.04;
inline constexpr std::size_t kSampleRate = 16000;
inline constexpr std::size_t kSamplesPerFrame = kSampleRate / kFrameRate;
inline constexpr std::size_t kImageSize = 96;

struct AffectTrajectory {
    std::vector<double> arousal;
    std::vector<double> valence;

    std::size_t frames() const { return arousal.size(); }
    double duration_s() const { return static_cast<double>(frames()) * kFrameSeconds; }
};

std::uint64_t splitmix64(std::uint64_t x);
/// Stream seed for a named recording within a dataset.
std::uint64_t recording_seed(std::uint64_t dataset_seed, const std::string& id);

struct TrajectoryConfig {
    double reversion = 0.01;   // per frame
    double volatility = 0.05;  // per frame
    std::size_t smoothing = 25;
    double bound = 0.9;
};

/// Two independent smoothed mean-reverting walks. Throws ParameterError
/// unless duration_s is a positive multiple of 6.
AffectTrajectory gen_trajectory(std::uint64_t seed, double duration_s, const TrajectoryConfig& config = {});

double tone_f0(double arousal);
double tone_rms(double arousal);
inline constexpr std::size_t kHarmonics = 6;
/// Noise floor 30 dB below full-scale amplitude 0.5.
inline constexpr double kNoiseRms = 0.015811388300841896;

/// Phase-continuous harmonic tone with per-sample parameters interpolated
/// between frame centres, plus Gaussian noise; samples in [-1, 1].
std::vector<double> render_audio(const AffectTrajectory& trajectory, std::uint64_t seed);

/// Mouth bend in pixels: positive raises the corners.
double mouth_curvature(double valence);
double face_brightness(double valence);
/// One 96x96 RGB frame in [0, 1], HWC order, face shifted by (dx, dy) pixels.
std::vector<double> render_face(double valence, double dx, double dy);
io::FrameStack render_video(const AffectTrajectory& trajectory, std::uint64_t seed);

}  // namespace affect::synth
