#include "knockoff/inference.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <iostream>

#include "knockoff/errors.hpp"
#include "knockoff/rng.hpp"
#include "knockoff/sparse_glm.hpp"

namespace knockoff {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

void check_support(const Dataset& d, const std::vector<int>& support) {
  for (int j : support)
    if (j < 0 || j >= d.p())
      throw ValidationError("index out of range in support");
  for (size_t i = 1; i < support.size(); ++i)
    if (support[i] <= support[i - 1])
      throw ValidationError("support must be sorted and duplicate-free");
}

// design on the selected columns with a leading intercept column
Eigen::MatrixXd design_with_intercept(const Dataset& d,
                                      const std::vector<int>& support,
                                      CoefficientScale scale) {
  const Eigen::Index n = d.n();
  Eigen::MatrixXd xs(n, static_cast<Eigen::Index>(support.size()) + 1);
  xs.col(0).setOnes();
  for (size_t i = 0; i < support.size(); ++i) {
    const int j = support[i];
    // d.x is the canonical representation (standardized when the flag is
    // set); the raw view comes from the recorded affine map
    const bool use_raw =
        scale == CoefficientScale::raw ||
        (scale == CoefficientScale::standardized_continuous_only &&
         d.is_binary_column(j));
    xs.col(static_cast<Eigen::Index>(i) + 1) =
        use_raw ? d.raw_column(j) : d.x.col(j);
  }
  return xs;
}

double normal_two_sided_p(double z) {
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

double mean_validation_nll(const Eigen::MatrixXd& xs_val,
                           const Eigen::VectorXd& y_val,
                           const Eigen::VectorXd& coef) {
  const Eigen::VectorXd eta = xs_val * coef;
  double nll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    nll += softplus(eta[i]) - y_val[i] * eta[i];
  return nll / static_cast<double>(eta.size());
}

}  // namespace

RefitEstimates refit_logistic(const Dataset& d, const std::vector<int>& support) {
  validate_dataset(d);
  check_support(d, support);
  const Eigen::Index n = d.n();
  const Eigen::Index m = static_cast<Eigen::Index>(support.size()) + 1;
  if (m >= n)
    throw ValidationError("support too large for an unpenalized refit");

  const Eigen::MatrixXd xs =
      design_with_intercept(d, support, CoefficientScale::standardized_all);
  const Eigen::VectorXd& y = d.y;
  const double ybar = y.mean();
  if (ybar <= 0.0 || ybar >= 1.0)
    throw ValidationError("degenerate response: y is constant");

  Eigen::VectorXd coef = Eigen::VectorXd::Zero(m);
  coef[0] = std::log(ybar / (1.0 - ybar));

  constexpr double score_tol = 1e-10;
  constexpr int max_iter = 100;
  constexpr double divergence_bound = 1e3;

  Eigen::VectorXd eta = xs * coef;
  auto nll_at = [&](const Eigen::VectorXd& e) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) v += softplus(e[i]) - y[i] * e[i];
    return v / static_cast<double>(n);
  };
  double nll = nll_at(eta);
  double score_norm = std::numeric_limits<double>::infinity();
  bool converged = false;

  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::VectorXd prob(n), weight(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(eta[i]);
      weight[i] = prob[i] * (1.0 - prob[i]);
    }
    const Eigen::VectorXd score = xs.transpose() * (prob - y) /
                                  static_cast<double>(n);
    score_norm = score.lpNorm<Eigen::Infinity>();
    if (score_norm <= score_tol) {
      converged = true;
      break;
    }

    const Eigen::MatrixXd info =
        xs.transpose() * weight.asDiagonal() * xs / static_cast<double>(n);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success)
      throw ComputationError("singular information matrix in logistic refit");
    const Eigen::VectorXd direction = ldlt.solve(score);
    if (!direction.allFinite())
      throw ComputationError("singular information matrix in logistic refit");

    double step = 1.0;
    Eigen::VectorXd next_coef, next_eta;
    double next_nll = 0.0;
    bool accepted = false;
    for (int half = 0; half < 60; ++half) {
      next_coef = coef - step * direction;
      next_eta = xs * next_coef;
      next_nll = nll_at(next_eta);
      if (next_nll <= nll + 1e-14) {
        accepted = true;
        break;
      }
      step /= 2.0;
    }
    if (!accepted)
      throw ComputationError("logistic refit line search failed");
    coef = next_coef;
    eta = next_eta;
    nll = next_nll;

    if (coef.lpNorm<Eigen::Infinity>() > divergence_bound)
      throw SeparationError(
          "separation: logistic MLE diverges (no finite estimates)");
  }
  if (!converged) {
    if (coef.lpNorm<Eigen::Infinity>() > 30.0)
      throw SeparationError(
          "separation: logistic MLE diverges (no finite estimates)");
    throw ComputationError("logistic refit did not converge");
  }
  // a numerically perfect fit with a large norm means the score vanished by
  // saturation, not at a finite MLE
  if (nll < 1e-8 && coef.lpNorm<Eigen::Infinity>() > 10.0)
    throw SeparationError(
        "separation: logistic MLE diverges (no finite estimates)");

  // covariance from the unnormalized observed information
  Eigen::VectorXd weight(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pi = sigmoid(eta[i]);
    weight[i] = pi * (1.0 - pi);
  }
  const Eigen::MatrixXd info = xs.transpose() * weight.asDiagonal() * xs;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  const Eigen::MatrixXd cov =
      ldlt.solve(Eigen::MatrixXd::Identity(m, m));
  if (!cov.allFinite())
    throw ComputationError("singular information matrix in logistic refit");

  RefitEstimates out;
  out.support = support;
  out.kind = RefitKind::logistic;
  out.scale = CoefficientScale::standardized_all;
  out.coef = coef;
  out.se.resize(m);
  out.p_values.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    out.se[j] = std::sqrt(cov(j, j));
    out.p_values[j] = normal_two_sided_p(coef[j] / out.se[j]);
  }
  out.certificate_residual = score_norm;
  return out;
}

RefitEstimates refit_ols(const Dataset& d, const std::vector<int>& support,
                         CoefficientScale scale) {
  validate_dataset(d);
  check_support(d, support);
  const Eigen::Index n = d.n();
  const Eigen::Index m = static_cast<Eigen::Index>(support.size()) + 1;

  const Eigen::MatrixXd xs = design_with_intercept(d, support, scale);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
  if (qr.rank() < m)
    throw ValidationError("rank-deficient design in least-squares refit");
  const Eigen::VectorXd coef = qr.solve(d.y);
  const Eigen::VectorXd resid = d.y - xs * coef;

  RefitEstimates out;
  out.support = support;
  out.kind = RefitKind::ols;
  out.scale = scale;
  out.coef = coef;
  out.certificate_residual =
      (xs.transpose() * resid).lpNorm<Eigen::Infinity>();

  out.se.resize(m);
  out.p_values.resize(m);
  const Eigen::Index df = n - m;
  if (df > 0) {
    const double sigma2 = resid.squaredNorm() / static_cast<double>(df);
    const Eigen::MatrixXd xtx_inv =
        (xs.transpose() * xs).ldlt().solve(Eigen::MatrixXd::Identity(m, m));
    for (Eigen::Index j = 0; j < m; ++j) {
      out.se[j] = std::sqrt(sigma2 * xtx_inv(j, j));
      out.p_values[j] = out.se[j] > 0.0
                            ? normal_two_sided_p(coef[j] / out.se[j])
                            : std::numeric_limits<double>::quiet_NaN();
    }
  } else {
    out.se.setConstant(std::numeric_limits<double>::quiet_NaN());
    out.p_values.setConstant(std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

MarginalEffects marginal_effects(const RefitEstimates& fit, const Dataset& d) {
  if (fit.kind != RefitKind::logistic)
    throw ValidationError("marginal effects need a logistic refit");
  check_support(d, fit.support);
  const Eigen::Index n = d.n();
  const Eigen::Index m = fit.coef.size();
  const Eigen::Index s = m - 1;

  const Eigen::MatrixXd xs =
      design_with_intercept(d, fit.support, CoefficientScale::standardized_all);
  const Eigen::VectorXd eta = xs * fit.coef;
  Eigen::VectorXd weight(n), curved(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pi = sigmoid(eta[i]);
    weight[i] = pi * (1.0 - pi);
    curved[i] = (1.0 - 2.0 * pi) * weight[i];
  }
  const double mean_weight = weight.mean();
  // d mean_weight / d coef_k = mean_i (1 - 2 p_i) p_i (1 - p_i) x_ik
  const Eigen::VectorXd dmean =
      xs.transpose() * curved / static_cast<double>(n);

  const Eigen::MatrixXd info = xs.transpose() * weight.asDiagonal() * xs;
  const Eigen::MatrixXd cov =
      info.ldlt().solve(Eigen::MatrixXd::Identity(m, m));
  if (!cov.allFinite())
    throw ComputationError("singular information matrix in marginal effects");

  MarginalEffects out;
  out.ame.resize(s);
  out.se.resize(s);
  for (Eigen::Index j = 0; j < s; ++j) {
    const double beta_j = fit.coef[j + 1];
    out.ame[j] = beta_j * mean_weight;
    Eigen::VectorXd grad = beta_j * dmean;
    grad[j + 1] += mean_weight;
    out.se[j] = std::sqrt(grad.dot(cov * grad));
  }
  return out;
}

std::string significance_stars(double p_value) {
  if (!(p_value == p_value)) return "";
  if (p_value < 0.01) return "***";
  if (p_value < 0.05) return "**";
  if (p_value < 0.10) return "*";
  return "";
}

PredictionReport cv_prediction_error(const Dataset& d, const Selector& selector,
                                     const FoldAssignment& folds,
                                     std::uint64_t seed,
                                     const std::string& method_label) {
  validate_dataset(d);
  if (folds.n() != d.n())
    throw ValidationError("fold assignment does not match the dataset");

  // raw values, so each fold can be standardized on its own
  Eigen::MatrixXd raw(d.n(), d.p());
  for (Eigen::Index j = 0; j < d.p(); ++j) raw.col(j) = d.raw_column(j);

  PredictionReport report;
  report.folds = folds;
  report.method_label = method_label;

  double total = 0.0;
  int used = 0;
  for (int fold = 1; fold <= folds.k; ++fold) {
    try {
      const auto train = fold_training_rows(folds, fold);
      const auto val = fold_validation_rows(folds, fold);
      Eigen::MatrixXd xt(train.size(), d.p());
      Eigen::VectorXd yt(train.size());
      for (size_t i = 0; i < train.size(); ++i) {
        xt.row(static_cast<Eigen::Index>(i)) = raw.row(train[i]);
        yt[static_cast<Eigen::Index>(i)] = d.y[train[i]];
      }
      Dataset dtrain = standardize(
          make_dataset(std::move(xt), std::move(yt), d.column_names));

      const std::vector<int> support =
          selector(dtrain, mix_seed(seed, static_cast<std::uint64_t>(fold)));
      const RefitEstimates refit = refit_logistic(dtrain, support);

      // validation columns mapped through the training standardization
      Eigen::MatrixXd xv(val.size(),
                         static_cast<Eigen::Index>(support.size()) + 1);
      xv.col(0).setOnes();
      Eigen::VectorXd yv(val.size());
      for (size_t i = 0; i < val.size(); ++i) {
        const int row = val[i];
        yv[static_cast<Eigen::Index>(i)] = d.y[row];
        for (size_t c = 0; c < support.size(); ++c) {
          const int j = support[c];
          xv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c) + 1) =
              (raw(row, j) - dtrain.column_means[j]) / dtrain.column_scales[j];
        }
      }
      total += mean_validation_nll(xv, yv, refit.coef);
      ++used;
    } catch (const std::exception& e) {
      report.failed_folds.push_back(fold);
      std::cerr << "warning: fold " << fold << " excluded: " << e.what()
                << "\n";
    }
  }
  if (used == 0)
    throw ComputationError("every cross-validation fold failed");
  report.pred_error = total / static_cast<double>(used);

  const std::vector<int> full_support = selector(d, mix_seed(seed, 0));
  report.model_size = static_cast<int>(full_support.size());
  return report;
}

}  // namespace knockoff
