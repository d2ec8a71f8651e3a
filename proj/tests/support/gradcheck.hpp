#pragma once

// Finite-difference oracle shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "affect/tensor/tensor.hpp"

namespace affect::testing {

/// Elementwise relative error. Components smaller than 1e-3 of the largest
/// numeric component are measured against that floor instead of their own
/// magnitude, so near-zero entries do not turn rounding noise into failures.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
    double scale = 0.0;
    for (double v : numeric) scale = std::max(scale, std::abs(v));
    const double floor = std::max(1e-3 * scale, 1e-12);
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

/// Central differences of loss() with respect to every element of `param`.
template <typename LossFn>
std::vector<double> numeric_gradient(Tensor& param, LossFn&& loss, double step = 1e-6) {
    auto data = param.mutable_data();
    std::vector<double> g(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double saved = data[i];
        data[i] = saved + step;
        const double up = loss().item();
        data[i] = saved - step;
        const double down = loss().item();
        data[i] = saved;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

/// Reverse-mode gradient of loss() with respect to `param`.
template <typename LossFn>
std::vector<double> analytic_gradient(const Tensor& param, LossFn&& loss) {
    Tape tape;
    Tensor value;
    {
        TapeScope scope(tape);
        value = loss();
    }
    GradTable grads = tape.gradients(value);
    const std::vector<double>* g = grads.find(param);
    return g ? *g : std::vector<double>(param.numel(), 0.0);
}

template <typename LossFn>
double gradient_error(Tensor& param, LossFn&& loss, double step = 1e-6) {
    const auto a = analytic_gradient(param, loss);
    const auto n = numeric_gradient(param, loss, step);
    return max_relative_error(a, n);
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = true, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = normal(rng);
    return Tensor::from(std::move(shape), std::move(data), requires_grad);
}

}  // namespace affect::testing
