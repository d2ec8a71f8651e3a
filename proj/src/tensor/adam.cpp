#include "affect/tensor/adam.hpp"

#include <cmath>
#include <string>

#include "affect/error.hpp"

namespace affect {

AdamState AdamState::for_params(std::span<const Tensor> params) {
    AdamState state;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.numel(), 0.0);
        state.second_moment.emplace_back(p.numel(), 0.0);
    }
    return state;
}

void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, AdamState& state, double lr) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
        params.size() != state.second_moment.size()) {
        throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                             std::to_string(grads.size()) + " gradients, " + std::to_string(state.first_moment.size()) +
                             " moment slots");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::size_t n = params[i].numel();
        if (grads[i].size() != n || state.first_moment[i].size() != n || state.second_moment[i].size() != n) {
            throw DimensionError("adam_step: length mismatch for parameter " + std::to_string(i));
        }
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].mutable_data();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        const auto& g = grads[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double m_hat = m[j] / c1;
            const double v_hat = v[j] / c2;
            w[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

double clip_global_norm(std::span<std::vector<double>> grads, double max_norm) {
    double sq = 0.0;
    for (const auto& g : grads)
        for (double v : g) sq += v * v;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double f = max_norm / norm;
        for (auto& g : grads)
            for (double& v : g) v *= f;
    }
    return norm;
}

}  // namespace affect
