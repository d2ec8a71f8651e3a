#include "affect/metrics/concordance.hpp"

#include <cmath>
#include <string>

#include "affect/error.hpp"
#include "affect/tensor/ops.hpp"

namespace affect::metrics {
namespace {

void validate_pair(std::span<const double> pred, std::span<const double> gold) {
    if (pred.size() != gold.size()) {
        throw DimensionError("prediction length " + std::to_string(pred.size()) + " differs from gold length " +
                             std::to_string(gold.size()));
    }
    if (pred.size() < 2) throw DimensionError("concordance needs at least two samples");
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!std::isfinite(pred[i]) || !std::isfinite(gold[i])) {
            throw ParameterError("non-finite value at index " + std::to_string(i));
        }
    }
}

}  // namespace

MomentSet moments(std::span<const double> pred, std::span<const double> gold) {
    validate_pair(pred, gold);
    const double n = static_cast<double>(pred.size());
    MomentSet m;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        m.mu_x += pred[i];
        m.mu_y += gold[i];
    }
    m.mu_x /= n;
    m.mu_y /= n;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double dx = pred[i] - m.mu_x;
        const double dy = gold[i] - m.mu_y;
        m.var_x += dx * dx;
        m.var_y += dy * dy;
        m.cov_xy += dx * dy;
    }
    m.var_x /= n;
    m.var_y /= n;
    m.cov_xy /= n;
    const double bias = m.mu_x - m.mu_y;
    m.psi = m.var_x + m.var_y + bias * bias;
    return m;
}

double ccc(std::span<const double> pred, std::span<const double> gold) {
    const MomentSet m = moments(pred, gold);
    if (!(m.psi > 0.0)) throw DegenerateInputError("concordance undefined: both tracks constant and equal");
    return 2.0 * m.cov_xy / m.psi;
}

double ccc_loss(std::span<const double> pred, std::span<const double> gold) { return 1.0 - ccc(pred, gold); }

std::vector<double> ccc_loss_grad(std::span<const double> pred, std::span<const double> gold) {
    const MomentSet m = moments(pred, gold);
    if (!(m.psi > 0.0)) throw DegenerateInputError("concordance gradient undefined: psi = 0");
    const double n = static_cast<double>(pred.size());
    const double a = 2.0 * m.cov_xy / (m.psi * m.psi);
    std::vector<double> g(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        g[i] = (2.0 / n) * (a * (pred[i] - m.mu_y) + (m.mu_y - gold[i]) / m.psi);
    }
    return g;
}

double pearson(std::span<const double> pred, std::span<const double> gold) {
    const MomentSet m = moments(pred, gold);
    if (!(m.var_x > 0.0) || !(m.var_y > 0.0)) throw DegenerateInputError("pearson undefined for zero-variance input");
    return m.cov_xy / std::sqrt(m.var_x * m.var_y);
}

double mse(std::span<const double> pred, std::span<const double> gold) {
    validate_pair(pred, gold);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - gold[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

double combined_loss(std::span<const double> arousal_pred, std::span<const double> arousal_gold,
                     std::span<const double> valence_pred, std::span<const double> valence_gold) {
    return 0.5 * (ccc_loss(arousal_pred, arousal_gold) + ccc_loss(valence_pred, valence_gold));
}

Tensor ccc_loss(const Tensor& pred, std::span<const double> gold) {
    if (pred.rank() != 1) throw DimensionError("ccc_loss expects a rank-1 prediction, got " + shape_string(pred.shape()));
    const double value = ccc_loss(pred.data(), gold);
    std::vector<double> gold_copy(gold.begin(), gold.end());
    Tensor out = Tensor::scalar(value, false);
    if (pred.requires_grad() && active_tape() != nullptr) {
        out.set_requires_grad(true);
        active_tape()->record({pred}, out, [pred, gold_copy = std::move(gold_copy)](std::span<const double> g, GradTable& grads) {
            const std::vector<double> local = ccc_loss_grad(pred.data(), gold_copy);
            auto& gp = grads.at(pred);
            for (std::size_t i = 0; i < local.size(); ++i) gp[i] += g[0] * local[i];
        });
    }
    return out;
}

Tensor mse_loss(const Tensor& pred, std::span<const double> gold) {
    if (pred.rank() != 1) throw DimensionError("mse_loss expects a rank-1 prediction, got " + shape_string(pred.shape()));
    const double value = mse(pred.data(), gold);
    std::vector<double> gold_copy(gold.begin(), gold.end());
    Tensor out = Tensor::scalar(value, false);
    if (pred.requires_grad() && active_tape() != nullptr) {
        out.set_requires_grad(true);
        active_tape()->record({pred}, out, [pred, gold_copy = std::move(gold_copy)](std::span<const double> g, GradTable& grads) {
            auto& gp = grads.at(pred);
            const double n = static_cast<double>(gold_copy.size());
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[0] * 2.0 * (pred[i] - gold_copy[i]) / n;
        });
    }
    return out;
}

Tensor combined_loss(const Tensor& arousal_pred, std::span<const double> arousal_gold, const Tensor& valence_pred,
                     std::span<const double> valence_gold) {
    return scale(add(ccc_loss(arousal_pred, arousal_gold), ccc_loss(valence_pred, valence_gold)), 0.5);
}

}  // namespace affect::metrics
