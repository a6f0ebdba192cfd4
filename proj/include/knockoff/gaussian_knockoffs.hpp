#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "knockoff/dataset.hpp"

namespace knockoff {

struct CovarianceEstimate {
  Eigen::MatrixXd sigma;
  double shrinkage = 0.0;  // gamma applied toward the identity
};

// Empirical correlation-scale covariance X'X/n, shrunk toward the identity by
// the minimal gamma in {0, 1e-4, 1e-3, 1e-2, 1e-1} with lambda_min >= 1e-6;
// unit diagonal restored after shrinkage.
CovarianceEstimate estimate_covariance(const Dataset& d);

// Equicorrelated construction: s_j = slack * min(2 lambda_min(sigma), 1).
// slack < 1 keeps the conditional covariance strictly positive definite.
Eigen::VectorXd compute_s_equicorrelated(const Eigen::MatrixXd& sigma,
                                         double slack);

struct KnockoffParameters {
  Eigen::MatrixXd mu;  // n x p row-wise conditional means
  Eigen::MatrixXd v;   // p x p conditional covariance, exactly symmetric
};

// mu = X - X Sigma^-1 diag(s);  v = 2 diag(s) - diag(s) Sigma^-1 diag(s).
KnockoffParameters knockoff_parameters(const Dataset& d,
                                       const Eigen::MatrixXd& sigma,
                                       const Eigen::VectorXd& s);

struct KnockoffModel {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd sigma_inv;
  Eigen::VectorXd s;
  Eigen::MatrixXd v;
  double shrinkage = 0.0;
  double slack = 1.0;
  double lambda_min_v = 0.0;
};

KnockoffModel build_knockoff_model(const Dataset& d, double slack = 0.999);

struct KnockoffCopy {
  Eigen::MatrixXd x_tilde;  // same shape as the parent x
  std::uint64_t seed = 0;
  std::uint64_t parent_hash = 0;
};

// Row i of x_tilde is an independent draw from N(mu_i, V) using a shared
// lower-triangular factor of V. Normal draws come from a counter-based
// stream keyed by (seed, row), so the result is a pure function of
// (parent x, model, seed) regardless of evaluation order.
KnockoffCopy sample_knockoffs(const Dataset& d, const KnockoffModel& model,
                              std::uint64_t seed);

}  // namespace knockoff
