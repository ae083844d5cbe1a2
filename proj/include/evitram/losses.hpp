#pragma once

#include "evitram/types.hpp"

namespace evitram {

// Floor applied to q inside the log so saturated rows cannot produce -inf.
inline constexpr double kLogClampEps = 1e-12;

// Mean over samples of the per-sample sum of squared feature errors:
//   (1/N) * sum_i sum_j (pred_ij - target_ij)^2
// Sum over features, mean over samples -- fixed convention for all
// reconstruction losses here.
double mse(const Matrix& pred, const Matrix& target);

// d mse / d pred = 2 (pred - target) / N
Matrix mse_grad(const Matrix& pred, const Matrix& target);

// Mean over rows of -sum_c p_c * log(max(q_c, eps)), natural log. Both
// arguments must be row-stochastic (rows sum to 1 within 1e-6, entries
// nonnegative); otherwise a domain error is thrown.
double cross_entropy(const Matrix& p, const Matrix& q);

// Derivative of the clamped form w.r.t. q: -p/(N*q) where q > eps, else 0.
Matrix cross_entropy_grad(const Matrix& p, const Matrix& q);

}  // namespace evitram
