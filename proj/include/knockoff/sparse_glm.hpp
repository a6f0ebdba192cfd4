#pragma once

#include <Eigen/Dense>

#include <vector>

#include "knockoff/dataset.hpp"

namespace knockoff {

struct SolverOptions {
  double tol = 1e-7;       // max absolute coefficient change per pass
  int max_passes = 100000;
  double kkt_target = 5e-5;  // internal stationarity target; the certified
                             // tolerance reported per fit is 1e-4
  double divergence_bound = 1e6;
};

// One l1-penalized logistic fit at penalty level r. The objective is the
// mean negative log-likelihood plus r * ||beta||_1; the intercept is
// unpenalized.
struct LassoFit {
  double r = 0.0;
  double intercept = 0.0;
  Eigen::VectorXd beta;
  double objective = 0.0;
  int iterations = 0;  // majorization passes
  bool converged = false;
  double kkt_violation = 0.0;  // max KKT residual at the returned point
};

// Mean negative log-likelihood of the logistic model (no penalty term).
double mean_nll(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                double intercept, const Eigen::VectorXd& beta);

// Gradient of mean_nll with respect to beta: X'(p - y)/n.
Eigen::VectorXd mean_nll_gradient(const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, double intercept,
                                  const Eigen::VectorXd& beta);

// Gradient of mean_nll with respect to the intercept: mean(p - y).
double mean_nll_intercept_gradient(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, double intercept,
                                   const Eigen::VectorXd& beta);

// Smallest penalty at which beta = 0 (with intercept logit(mean y)) satisfies
// the KKT conditions: max_j |x_j'(y - mean(y))| / n.
double lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

LassoFit fit_logistic_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            double r, const LassoFit* warm = nullptr,
                            const SolverOptions& opt = {});

struct LassoPath {
  Eigen::VectorXd grid;  // strictly decreasing, grid[0] = lambda_max
  std::vector<LassoFit> fits;
  // entry_level[j] = largest grid value at which beta_j != 0; 0 if never
  Eigen::VectorXd entry_level;
  bool truncated = false;           // a fit failed; path stops there
  bool continuity_warning = false;  // adjacent-fit coefficient jump flagged
};

Eigen::VectorXd make_grid(double lambda_max, int grid_size, double min_ratio);

LassoPath fit_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   int grid_size, double min_ratio,
                   const SolverOptions& opt = {});

// Same as fit_path but along an explicit grid, optionally stopping early
// after fitting grid[stop_index].
LassoPath fit_path_on_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& grid,
                           const SolverOptions& opt = {}, int stop_index = -1);

struct CrossValidationResult {
  double r_star = 0.0;
  int r_star_index = 0;
  Eigen::VectorXd cv_curve;  // mean validation per-observation NLL per grid r
};

// K-fold cross-validation along `grid` (decreasing). Each fold's models are
// warm-started along the grid; when a full-data `warm_path` over the same
// grid is supplied, its fits also seed the per-fold starts (whichever start
// scores better on the fold). r_star minimizes the mean validation NLL with
// ties broken toward the larger penalty.
CrossValidationResult cross_validate_lambda(const Eigen::MatrixXd& x,
                                            const Eigen::VectorXd& y,
                                            const FoldAssignment& folds,
                                            const Eigen::VectorXd& grid,
                                            const SolverOptions& opt = {},
                                            const LassoPath* warm_path = nullptr);

// Process-wide audit of every converged fit since the last reset.
struct SolverAudit {
  long converged_fits = 0;
  long nonconverged_fits = 0;
  double max_kkt_violation = 0.0;
};
SolverAudit solver_audit();
void reset_solver_audit();

}  // namespace knockoff
