#pragma once

// Concordance correlation coefficient, its loss and gradient, plus the
// Pearson/MSE companions used for evaluation and the MSE training mode.
//
// All moments are population (1/N) moments. For a prediction x and gold y:
//   psi  = var_x + var_y + (mu_x - mu_y)^2
//   rho_c = 2 cov_xy / psi,   loss = 1 - rho_c
//   dloss/dx_i = (2/N) [ 2 cov_xy (x_i - mu_y) / psi^2 + (mu_y - y_i) / psi ]

#include <span>
#include <vector>

#include "affect/tensor/tensor.hpp"

namespace affect::metrics {

struct MomentSet {
    double mu_x = 0.0;
    double mu_y = 0.0;
    double var_x = 0.0;
    double var_y = 0.0;
    double cov_xy = 0.0;
    double psi = 0.0;
};

/// Validates equal length >= 2 and finite values.
MomentSet moments(std::span<const double> pred, std::span<const double> gold);

double ccc(std::span<const double> pred, std::span<const double> gold);
double ccc_loss(std::span<const double> pred, std::span<const double> gold);
std::vector<double> ccc_loss_grad(std::span<const double> pred, std::span<const double> gold);
double pearson(std::span<const double> pred, std::span<const double> gold);
double mse(std::span<const double> pred, std::span<const double> gold);

/// Mean of the arousal and valence concordance losses.
double combined_loss(std::span<const double> arousal_pred, std::span<const double> arousal_gold,
                     std::span<const double> valence_pred, std::span<const double> valence_gold);

// Differentiable versions: `pred` is a rank-1 tensor, gold is constant.
Tensor ccc_loss(const Tensor& pred, std::span<const double> gold);
Tensor mse_loss(const Tensor& pred, std::span<const double> gold);
Tensor combined_loss(const Tensor& arousal_pred, std::span<const double> arousal_gold, const Tensor& valence_pred,
                     std::span<const double> valence_gold);

}  // namespace affect::metrics
