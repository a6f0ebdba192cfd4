#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "knockoff/dataset.hpp"

namespace knockoff {

enum class RefitKind { logistic, ols };

enum class CoefficientScale {
  standardized_all,
  standardized_continuous_only,  // binary columns reported on the raw scale
  raw
};

// Unpenalized refit on a selected support. coef[0] is the intercept,
// coef[1..] follow the support order; se/p_values use the same indexing.
struct RefitEstimates {
  std::vector<int> support;  // 0-based column indices, sorted
  RefitKind kind = RefitKind::logistic;
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  Eigen::VectorXd p_values;
  std::optional<Eigen::VectorXd> marginal_effects;     // support order
  std::optional<Eigen::VectorXd> marginal_effect_se;
  CoefficientScale scale = CoefficientScale::standardized_all;
  // logistic: max-abs score at coef; ols: max-abs of X_s'(y - yhat)
  double certificate_residual = 0.0;
};

// Unpenalized logistic MLE via iteratively reweighted least squares with
// step halving (score tolerance 1e-10, at most 100 iterations). Standard
// errors from the inverse observed Fisher information, two-sided normal
// p-values. Throws SeparationError when the MLE diverges.
RefitEstimates refit_logistic(const Dataset& d, const std::vector<int>& support);

// Least squares of y on the selected columns plus intercept, classical
// standard errors. `scale` controls the reporting scale of the columns.
RefitEstimates refit_ols(const Dataset& d, const std::vector<int>& support,
                         CoefficientScale scale);

struct MarginalEffects {
  Eigen::VectorXd ame;  // beta_j * mean_i p_i (1 - p_i), support order
  Eigen::VectorXd se;   // delta method
};

MarginalEffects marginal_effects(const RefitEstimates& fit, const Dataset& d);

// "***" / "**" / "*" at the 1/5/10 percent levels.
std::string significance_stars(double p_value);

struct PredictionReport {
  int model_size = 0;   // support size of the selector on the full data
  double pred_error = 0.0;  // mean per-observation validation NLL over folds
  FoldAssignment folds;
  std::string method_label;
  std::vector<int> failed_folds;  // 1-based fold ids excluded from the mean
};

// A selection procedure: maps a standardized dataset and a seed to a support.
using Selector = std::function<std::vector<int>(const Dataset&, std::uint64_t)>;

// Per fold: run the selector on the training part (re-standardized), refit
// logistic on the selected support, and evaluate the mean per-observation
// negative log-likelihood on the validation part under the training
// standardization. Failed folds are recorded and excluded.
PredictionReport cv_prediction_error(const Dataset& d, const Selector& selector,
                                     const FoldAssignment& folds,
                                     std::uint64_t seed,
                                     const std::string& method_label);

}  // namespace knockoff
