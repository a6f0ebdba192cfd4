#include "knockoff/gaussian_knockoffs.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "knockoff/errors.hpp"
#include "knockoff/rng.hpp"

namespace knockoff {

namespace {

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m,
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw ComputationError("eigenvalue computation failed");
  return es.eigenvalues().minCoeff();
}

}  // namespace

CovarianceEstimate estimate_covariance(const Dataset& d) {
  if (!d.standardized)
    throw ValidationError("covariance estimation needs a standardized dataset");
  const double n = static_cast<double>(d.n());
  const Eigen::MatrixXd raw = d.x.transpose() * d.x / n;

  static constexpr double ladder[] = {0.0, 1e-4, 1e-3, 1e-2, 1e-1};
  for (const double gamma : ladder) {
    Eigen::MatrixXd sigma =
        (1.0 - gamma) * raw +
        gamma * Eigen::MatrixXd::Identity(raw.rows(), raw.cols());
    sigma.diagonal().setOnes();
    sigma = ((sigma + sigma.transpose()) / 2.0).eval();
    if (min_eigenvalue(sigma) >= 1e-6) return {std::move(sigma), gamma};
  }
  // unreachable: gamma = 0.1 bounds lambda_min from below by ~0.1
  throw ComputationError("covariance shrinkage ladder exhausted");
}

Eigen::VectorXd compute_s_equicorrelated(const Eigen::MatrixXd& sigma,
                                         double slack) {
  if (sigma.rows() != sigma.cols()) throw ValidationError("sigma not square");
  if (slack <= 0.0 || slack > 1.0)
    throw ValidationError("slack must lie in (0, 1]");
  const double lmin = min_eigenvalue(sigma);
  if (lmin <= 0.0)
    throw ValidationError("sigma is not positive definite");
  return Eigen::VectorXd::Constant(sigma.rows(),
                                   slack * std::min(2.0 * lmin, 1.0));
}

KnockoffParameters knockoff_parameters(const Dataset& d,
                                       const Eigen::MatrixXd& sigma,
                                       const Eigen::VectorXd& s) {
  if (sigma.rows() != d.p() || s.size() != d.p())
    throw ValidationError("shape mismatch between dataset, sigma and s");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw ValidationError("sigma is not positive definite");

  // sigma^-1 diag(s)
  const Eigen::MatrixXd inv_times_s = llt.solve(Eigen::MatrixXd(s.asDiagonal()));

  KnockoffParameters out;
  out.mu = d.x - d.x * inv_times_s;
  Eigen::MatrixXd b = s.asDiagonal() * inv_times_s;
  b = ((b + b.transpose()) / 2.0).eval();  // exactly symmetric
  out.v = Eigen::MatrixXd(2.0 * s.asDiagonal()) - b;

  Eigen::LLT<Eigen::MatrixXd> vllt(out.v);
  if (vllt.info() != Eigen::Success)
    throw ComputationError("conditional covariance V is not positive definite");
  return out;
}

KnockoffModel build_knockoff_model(const Dataset& d, double slack) {
  CovarianceEstimate cov = estimate_covariance(d);
  KnockoffModel model;
  model.slack = slack;
  model.shrinkage = cov.shrinkage;
  model.s = compute_s_equicorrelated(cov.sigma, slack);

  KnockoffParameters params = knockoff_parameters(d, cov.sigma, model.s);
  model.v = std::move(params.v);
  model.lambda_min_v = min_eigenvalue(model.v);

  Eigen::LLT<Eigen::MatrixXd> llt(cov.sigma);
  Eigen::MatrixXd inv =
      llt.solve(Eigen::MatrixXd::Identity(d.p(), d.p()));
  // one refinement step tightens the inverse under heavy ill-conditioning
  double resid = (inv * cov.sigma - Eigen::MatrixXd::Identity(d.p(), d.p()))
                     .cwiseAbs()
                     .maxCoeff();
  if (resid > 5e-9) {
    inv = (inv * (2.0 * Eigen::MatrixXd::Identity(d.p(), d.p()) -
                  cov.sigma * inv))
              .eval();
  }
  model.sigma_inv = ((inv + inv.transpose()) / 2.0).eval();
  model.sigma = std::move(cov.sigma);
  return model;
}

KnockoffCopy sample_knockoffs(const Dataset& d, const KnockoffModel& model,
                              std::uint64_t seed) {
  if (!d.standardized)
    throw ValidationError("knockoff sampling needs a standardized dataset");
  if (model.sigma.rows() != d.p() || model.s.size() != d.p())
    throw ValidationError("knockoff model does not match dataset");

  Eigen::LLT<Eigen::MatrixXd> vllt(model.v);
  if (vllt.info() != Eigen::Success)
    throw ComputationError("conditional covariance V is not positive definite");
  const Eigen::MatrixXd chol_t = Eigen::MatrixXd(vllt.matrixL()).transpose();

  const Eigen::Index n = d.n(), p = d.p();
  Eigen::MatrixXd z(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const CounterRng row_rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    for (Eigen::Index j = 0; j < p; ++j)
      z(i, j) = row_rng.normal(static_cast<std::uint64_t>(j));
  }

  KnockoffCopy copy;
  copy.seed = seed;
  copy.parent_hash = dataset_checksum(d);
  const Eigen::MatrixXd inv_times_s =
      model.sigma_inv * Eigen::MatrixXd(model.s.asDiagonal());
  copy.x_tilde = d.x - d.x * inv_times_s + z * chol_t;
  return copy;
}

}  // namespace knockoff
