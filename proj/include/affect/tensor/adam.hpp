#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "affect/tensor/tensor.hpp"

namespace affect {

/// Learning rate used for every experiment unless overridden.
inline constexpr double kDefaultLearningRate = 1e-4;

struct AdamState {
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    /// Zeroed moments sized to match `params`.
    static AdamState for_params(std::span<const Tensor> params);
};

/// One bias-corrected Adam update applied in place to `params`.
void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamState& state, double lr);

/// Scales `grads` so their global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
double clip_global_norm(std::span<std::vector<double>> grads, double max_norm);

}  // namespace affect
