#include "affect/analysis/descriptors.hpp"

#include <algorithm>
#include <cmath>

#include "affect/error.hpp"

namespace affect::analysis {

PitchEstimate estimate_pitch(std::span<const double> window, std::size_t frame_samples, const DescriptorConfig& c) {
    const auto min_lag = static_cast<std::size_t>(std::floor(static_cast<double>(c.sample_rate) / c.f0_max));
    const auto max_lag = static_cast<std::size_t>(std::ceil(static_cast<double>(c.sample_rate) / c.f0_min));
    const std::size_t n = std::min(frame_samples, window.size());
    if (n <= max_lag + 1) return {};
    // r[lag] for lag in [min_lag - 1, max_lag + 1] so peaks at the band edges can be refined.
    const std::size_t lo = min_lag - 1, hi = max_lag + 1;
    std::vector<double> r(hi - lo + 1, 0.0);
    for (std::size_t lag = lo; lag <= hi; ++lag) {
        const std::size_t count = std::min(n, window.size() - lag);
        double xy = 0.0, xx = 0.0, yy = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            xy += window[i] * window[i + lag];
            xx += window[i] * window[i];
            yy += window[i + lag] * window[i + lag];
        }
        r[lag - lo] = (xx > 0.0 && yy > 0.0) ? xy / std::sqrt(xx * yy) : 0.0;
    }
    double best = 0.0;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) best = std::max(best, r[lag - lo]);
    if (best <= 0.0) return {};
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
        const double here = r[lag - lo], left = r[lag - lo - 1], right = r[lag - lo + 1];
        if (here >= 0.9 * best && here >= left && here >= right) {
            const double denom = left - 2.0 * here + right;
            const double delta = denom < 0.0 ? std::clamp(0.5 * (left - right) / denom, -0.5, 0.5) : 0.0;
            return {static_cast<double>(c.sample_rate) / (static_cast<double>(lag) + delta), here};
        }
    }
    return {};
}

std::vector<DescriptorFrame> compute_descriptors(std::span<const double> samples, const DescriptorConfig& c) {
    const std::size_t frames = c.frame_samples == 0 ? 0 : samples.size() / c.frame_samples;
    if (frames == 0) throw DataError("audio too short for one descriptor frame");
    const auto max_lag = static_cast<std::size_t>(std::ceil(static_cast<double>(c.sample_rate) / c.f0_min));
    std::vector<DescriptorFrame> out(frames);
    double last_f0 = 0.0;
    for (std::size_t f = 0; f < frames; ++f) {
        const std::size_t start = f * c.frame_samples;
        double ss = 0.0;
        for (std::size_t i = 0; i < c.frame_samples; ++i) ss += samples[start + i] * samples[start + i];
        auto& d = out[f];
        d.rms_energy = std::sqrt(ss / static_cast<double>(c.frame_samples));
        d.loudness = std::log1p(d.rms_energy / c.loudness_ref);
        const std::size_t stop = std::min(samples.size(), start + c.frame_samples + max_lag + 1);
        const PitchEstimate p = estimate_pitch(samples.subspan(start, stop - start), c.frame_samples, c);
        if (p.strength >= c.voicing_threshold && p.f0 >= c.f0_min && p.f0 <= c.f0_max) {
            last_f0 = p.f0;
            d.voiced = true;
        }
        d.f0 = last_f0;
    }
    const std::size_t half = c.range_frames / 2;
    for (std::size_t f = 0; f < frames; ++f) {
        const std::size_t a = f >= half ? f - half : 0, b = std::min(frames - 1, f + half);
        double lo = out[a].rms_energy, hi = lo;
        for (std::size_t k = a; k <= b; ++k) {
            lo = std::min(lo, out[k].rms_energy);
            hi = std::max(hi, out[k].rms_energy);
        }
        out[f].rms_range = hi - lo;
    }
    return out;
}

std::vector<double> descriptor_series(std::span<const DescriptorFrame> frames, std::size_t index) {
    if (index >= kDescriptorCount) throw ParameterError("descriptor index out of range");
    std::vector<double> s(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& d = frames[i];
        s[i] = index == 0 ? d.rms_energy : index == 1 ? d.rms_range : index == 2 ? d.loudness : d.f0;
    }
    return s;
}

}  // namespace affect::analysis
