#pragma once

// Validation-fitted prediction corrections applied in a fixed order:
// median filter, centring, scaling, time shift.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace affect::post {

/// Centred sliding median. Windows are truncated at the ends; an even count
/// of samples takes the mean of the two middle values. Throws ParameterError
/// for even windows, windows below 3, or windows longer than the track.
std::vector<double> median_filter(std::span<const double> pred, std::size_t window);
std::vector<double> center(std::span<const double> pred, double bias);
/// mean + ratio * (x - mean); ratio must be positive.
std::vector<double> scale(std::span<const double> pred, double ratio);
/// out[t] = pred[t - k] for t >= k, pred[0] before; requires k < length.
std::vector<double> time_shift(std::span<const double> pred, std::size_t k);

enum class StepKind { median, center, scale, shift };
const char* step_name(StepKind kind);

struct StepRecord {
    StepKind kind = StepKind::median;
    bool kept = false;
    double param = 0.0;       // best candidate, even when not kept
    double rho_before = 0.0;  // chain rho when the step was last evaluated
    double rho_after = 0.0;   // rho with the best candidate added
};

struct PostProcessChain {
    std::vector<StepRecord> steps;  // one record per step, in application order

    bool empty() const;
    const StepRecord* kept(StepKind kind) const;
};

struct FitGrids {
    std::vector<std::size_t> median_windows{11, 21, 41, 81, 161, 321, 501};
    std::size_t max_shift = 250;
};

/// Validation rho gains at or below this are treated as rounding noise.
inline constexpr double kMinImprovement = 1e-12;

struct FitResult {
    PostProcessChain chain;
    std::vector<double> rho_trace;  // initial value, then after each kept step
};

/// Forward selection: each round tries every step not yet kept (searching its
/// grid, with the chain applied in fixed order) and keeps the single best one
/// if it improves validation rho. Stops when no step improves.
FitResult fit_chain(std::span<const double> val_pred, std::span<const double> val_gold, const FitGrids& grids = {});
std::vector<double> apply_chain(const PostProcessChain& chain, std::span<const double> pred);

using NamedChains = std::vector<std::pair<std::string, PostProcessChain>>;
std::string serialize_chains(const NamedChains& chains);
/// Throws ParseError naming `origin` and the byte offset of the bad line.
NamedChains parse_chains(const std::string& text, const std::string& origin);

}  // namespace affect::post
