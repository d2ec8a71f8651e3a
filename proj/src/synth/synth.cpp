#include "affect/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "affect/error.hpp"

namespace affect::synth {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t recording_seed(std::uint64_t dataset_seed, const std::string& id) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : id) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(dataset_seed) ^ h);
}

namespace {

std::vector<double> smooth_walk(std::mt19937_64& rng, std::size_t n, const TrajectoryConfig& c) {
    const std::size_t w = std::max<std::size_t>(c.smoothing, 1);
    const double stationary = c.volatility / std::sqrt(c.reversion * (2.0 - c.reversion));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> raw(n + w - 1);
    double x = std::clamp(stationary * normal(rng), -1.0, 1.0);
    for (double& r : raw) {
        r = x;
        x = std::clamp(x - c.reversion * x + c.volatility * normal(rng), -1.0, 1.0);
    }
    // Full-window moving average: consecutive outputs differ by at most 2 / w.
    std::vector<double> out(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < w; ++i) acc += raw[i];
    for (std::size_t t = 0; t < n; ++t) {
        out[t] = std::clamp(acc / static_cast<double>(w), -c.bound, c.bound);
        if (t + w < raw.size()) acc += raw[t + w] - raw[t];
    }
    return out;
}

}  // namespace

AffectTrajectory gen_trajectory(std::uint64_t seed, double duration_s, const TrajectoryConfig& config) {
    const double segments = duration_s / 6.0;
    if (!(duration_s > 0) || std::abs(segments - std::round(segments)) > 1e-9) {
        throw ParameterError("recording duration " + std::to_string(duration_s) + " s is not a positive multiple of 6 s");
    }
    const auto n = static_cast<std::size_t>(std::llround(duration_s * kFrameRate));
    std::mt19937_64 rng(splitmix64(seed ^ 0x7261));
    AffectTrajectory t;
    t.arousal = smooth_walk(rng, n, config);
    t.valence = smooth_walk(rng, n, config);
    return t;
}

double tone_f0(double arousal) { return 120.0 + 80.0 * (arousal + 1.0) / 2.0; }

double tone_rms(double arousal) { return 0.1 + 0.4 * (arousal + 1.0) / 2.0; }

std::vector<double> render_audio(const AffectTrajectory& trajectory, std::uint64_t seed) {
    const std::size_t frames = trajectory.frames();
    if (frames == 0) throw DataError("cannot render audio for an empty trajectory");
    std::mt19937_64 rng(splitmix64(seed ^ 0x617564));
    std::normal_distribution<double> noise(0.0, kNoiseRms);
    const double harmonic_gain = std::sqrt(2.0 / static_cast<double>(kHarmonics));
    double schroeder[kHarmonics];
    for (std::size_t h = 1; h <= kHarmonics; ++h) {
        schroeder[h - 1] = std::numbers::pi * static_cast<double>(h * (h - 1)) / static_cast<double>(kHarmonics);
    }
    std::vector<double> out(frames * kSamplesPerFrame);
    double phase = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double pos = (static_cast<double>(i) + 0.5) / static_cast<double>(kSamplesPerFrame) - 0.5;
        double a;
        if (pos <= 0.0) {
            a = trajectory.arousal.front();
        } else if (pos >= static_cast<double>(frames - 1)) {
            a = trajectory.arousal.back();
        } else {
            const auto k = static_cast<std::size_t>(pos);
            const double w = pos - static_cast<double>(k);
            a = trajectory.arousal[k] * (1.0 - w) + trajectory.arousal[k + 1] * w;
        }
        double tone = 0.0;
        for (std::size_t h = 0; h < kHarmonics; ++h) tone += std::cos(static_cast<double>(h + 1) * phase + schroeder[h]);
        out[i] = std::clamp(tone_rms(a) * harmonic_gain * tone + noise(rng), -1.0, 1.0);
        phase = std::fmod(phase + 2.0 * std::numbers::pi * tone_f0(a) / static_cast<double>(kSampleRate),
                          2.0 * std::numbers::pi);
    }
    return out;
}

double mouth_curvature(double valence) { return 6.0 * valence; }

double face_brightness(double valence) { return 0.75 + 0.2 * valence; }

std::vector<double> render_face(double valence, double dx, double dy) {
    constexpr std::size_t n = kImageSize;
    std::vector<double> px(n * n * 3);
    const double cx = 48.0 + dx, cy = 48.0 + dy;
    const double g = face_brightness(valence);
    const double bend = mouth_curvature(valence);
    const double skin[3] = {0.9 * g, 0.7 * g, 0.55 * g};
    const double mouth_y = cy + 18.0, mouth_half = 14.0;
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            const double fx = static_cast<double>(x), fy = static_cast<double>(y);
            double rgb[3] = {0.25, 0.3, 0.35};
            const double ex = (fx - cx) / 30.0, ey = (fy - cy) / 38.0;
            if (ex * ex + ey * ey <= 1.0) {
                std::copy(skin, skin + 3, rgb);
                for (double side : {-12.0, 12.0}) {
                    const double ux = fx - (cx + side), uy = fy - (cy - 10.0);
                    if (ux * ux + uy * uy <= 16.0) rgb[0] = rgb[1] = rgb[2] = 0.1;
                }
                const double u = (fx - cx) / mouth_half;
                if (std::abs(u) <= 1.0) {
                    const double curve = mouth_y + bend * (0.5 - u * u);
                    if (std::abs(fy - curve) <= 1.2) {
                        rgb[0] = 0.55;
                        rgb[1] = 0.1;
                        rgb[2] = 0.1;
                    }
                }
            }
            std::copy(rgb, rgb + 3, px.begin() + static_cast<std::ptrdiff_t>((y * n + x) * 3));
        }
    }
    return px;
}

io::FrameStack render_video(const AffectTrajectory& trajectory, std::uint64_t seed) {
    std::mt19937_64 rng(splitmix64(seed ^ 0x766964));
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    io::FrameStack stack{0, kImageSize, kImageSize, 3, {}};
    stack.pixels.reserve(trajectory.frames() * stack.frame_bytes());
    for (double v : trajectory.valence) {
        const double dx = jitter(rng), dy = jitter(rng);
        stack.push_real(render_face(v, dx, dy));
    }
    return stack;
}

}  // namespace affect::synth
