#include "knockoff/sparse_glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <vector>

#include "knockoff/errors.hpp"

namespace knockoff {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) {  // log(1 + e^t), overflow-safe
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double soft_threshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

struct Audit {
  std::mutex mu;
  long converged = 0;
  long nonconverged = 0;
  double max_kkt = 0.0;
};

Audit& audit() {
  static Audit a;
  return a;
}

void record_fit(bool converged, double kkt) {
  Audit& a = audit();
  std::lock_guard<std::mutex> lock(a.mu);
  if (converged) {
    ++a.converged;
    a.max_kkt = std::max(a.max_kkt, kkt);
  } else {
    ++a.nonconverged;
  }
}

// Coordinate-descent state for one (x, y) problem, reusable across a path.
struct Solver {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& y;
  Eigen::VectorXd col_curv;  // per-column majorization curvature ssq/(4n)
  double n;

  double b0 = 0.0;
  Eigen::VectorXd beta;
  Eigen::VectorXd eta;   // b0 + x * beta
  Eigen::VectorXd prob;  // sigmoid(eta)
  Eigen::VectorXd work;  // residual z - eta of the working response
  Eigen::VectorXd zbuf;

  Solver(const Eigen::MatrixXd& x_, const Eigen::VectorXd& y_)
      : x(x_), y(y_), n(static_cast<double>(x_.rows())) {
    const Eigen::Index p = x.cols();
    col_curv.resize(p);
    for (Eigen::Index j = 0; j < p; ++j)
      col_curv[j] = x.col(j).squaredNorm() / (4.0 * n);
    beta = Eigen::VectorXd::Zero(p);
    eta = Eigen::VectorXd::Constant(x.rows(), b0);
    prob.resize(x.rows());
    work.resize(x.rows());
    zbuf.resize(x.rows());
  }

  void set_start(double intercept, const Eigen::VectorXd& b) {
    b0 = intercept;
    beta = b;
    eta.noalias() = x * beta;
    eta.array() += b0;
  }

  double objective_at(const Eigen::VectorXd& eta_pt,
                      const Eigen::VectorXd& beta_pt, double r) const {
    double nll = 0.0;
    for (Eigen::Index i = 0; i < eta_pt.size(); ++i)
      nll += softplus(eta_pt[i]) - y[i] * eta_pt[i];
    return nll / n + r * beta_pt.lpNorm<1>();
  }

  double objective(double r) const { return objective_at(eta, beta, r); }

  // One cyclic CD sweep (intercept plus `coords`) on the current quadratic
  // surrogate; `work` holds the surrogate residual z - eta. Returns the max
  // absolute coefficient change.
  double cycle(double r, const std::vector<Eigen::Index>& coords) {
    double max_delta = 0.0;
    {  // unpenalized intercept, curvature n/(4n) = 1/4
      const double u = work.sum() / (4.0 * n) + 0.25 * b0;
      const double next = u / 0.25;
      const double delta = next - b0;
      if (delta != 0.0) {
        work.array() -= delta;
        b0 = next;
        max_delta = std::abs(delta);
      }
    }
    for (const Eigen::Index j : coords) {
      const double c = col_curv[j];
      const double u = x.col(j).dot(work) / (4.0 * n) + c * beta[j];
      const double next = soft_threshold(u, r) / c;
      const double delta = next - beta[j];
      if (delta != 0.0) {
        work.noalias() -= delta * x.col(j);
        beta[j] = next;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    return max_delta;
  }

  // One majorization pass: expand the quadratic bound (curvature 1/4) at the
  // current point, sweep once over `coords`, then keep sweeping the
  // coordinates active within the block until the surrogate is solved to
  // tolerance. The surrogate majorizes the penalized objective with equality
  // at the expansion point, so the true objective cannot increase across a
  // pass.
  void pass(double r, const std::vector<Eigen::Index>& coords, double tol,
            int max_cycles) {
    for (Eigen::Index i = 0; i < eta.size(); ++i) prob[i] = sigmoid(eta[i]);
    // residual of the working response z = eta + 4 (y - prob) vs current eta
    work = 4.0 * (y - prob);
    zbuf = eta + work;

    const double first_delta = cycle(r, coords);
    if (first_delta >= tol && max_cycles > 1) {
      std::vector<Eigen::Index> block;
      for (const Eigen::Index j : coords)
        if (beta[j] != 0.0) block.push_back(j);
      for (int c = 1; c < max_cycles; ++c)
        if (cycle(r, block) < tol) break;
    }
    eta = zbuf - work;
  }

  // Max KKT residual of the penalized objective at the current point.
  double kkt_violation(double r) {
    for (Eigen::Index i = 0; i < eta.size(); ++i)
      work[i] = sigmoid(eta[i]) - y[i];
    double worst = std::abs(work.sum() / n);  // intercept stationarity
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double g = x.col(j).dot(work) / n;
      const double v = beta[j] == 0.0
                           ? std::max(0.0, std::abs(g) - r)
                           : std::abs(g + r * (beta[j] > 0.0 ? 1.0 : -1.0));
      worst = std::max(worst, v);
    }
    return worst;
  }

  std::vector<Eigen::Index> all_coords() const {
    std::vector<Eigen::Index> c(static_cast<size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) c[static_cast<size_t>(j)] = j;
    return c;
  }

  std::vector<Eigen::Index> active_coords() const {
    std::vector<Eigen::Index> c;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (beta[j] != 0.0) c.push_back(j);
    return c;
  }

  // Over-relaxation: extrapolate along a descent direction while the true
  // objective keeps falling. In saturated regions the 1/4 curvature bound is
  // far above the actual curvature and plain passes crawl; stepping out along
  // the segment recovers fast convergence while every accepted point still
  // decreases the objective. X * (beta - beta_prev) equals eta - eta_prev, so
  // each trial is O(n). The search restarts near the last accepted factor,
  // which stays stable across passes in the slow regime.
  double last_factor = 1.0;
  double last_factor_long = 1.0;

  double extrapolate(double r, const Eigen::VectorXd& beta_prev,
                     double b0_prev, const Eigen::VectorXd& eta_prev,
                     double current_obj, double& memo) {
    double best_obj = current_obj;
    double best_f = 1.0;
    const Eigen::VectorXd beta_dir = beta - beta_prev;
    const Eigen::VectorXd eta_dir = eta - eta_prev;
    const double b0_dir = b0 - b0_prev;
    Eigen::VectorXd beta_c(beta.size()), eta_c(eta.size());
    auto try_factor = [&](double f) {
      beta_c = beta_prev + f * beta_dir;
      eta_c = eta_prev + f * eta_dir;
      const double obj_c = objective_at(eta_c, beta_c, r);
      if (obj_c < best_obj - 1e-15 * (1.0 + std::abs(best_obj))) {
        best_obj = obj_c;
        best_f = f;
        return true;
      }
      return false;
    };
    double f = std::max(2.0, memo / 2.0);
    if (!try_factor(f) && f > 2.0) {
      // the remembered factor overshoots now; fall back to small steps
      f = 2.0;
      try_factor(f);
    }
    while (best_f == f && f < 0x1p44) {
      f *= 2.0;
      if (!try_factor(f)) break;
    }
    if (best_f > 1.0) {
      beta = beta_prev + best_f * beta_dir;
      eta = eta_prev + best_f * eta_dir;
      b0 = b0_prev + best_f * b0_dir;
    }
    memo = best_f;
    return best_obj;
  }

  LassoFit solve(double r, const SolverOptions& opt) {
    const std::vector<Eigen::Index> full = all_coords();
    double obj = objective(r);
    bool converged = false;
    int passes = 0;
    bool full_pass = true;
    double kkt = std::numeric_limits<double>::infinity();

    std::vector<Eigen::Index> active;
    Eigen::VectorXd beta_prev(beta.size()), eta_prev(eta.size());
    // snapshot for secant extrapolation over a window of passes; the long
    // direction tracks the slowest error mode far better than a single step
    Eigen::VectorXd beta_snap = beta, eta_snap = eta;
    double b0_snap = b0;
    constexpr int snap_window = 8;

    while (passes < opt.max_passes) {
      beta_prev = beta;
      eta_prev = eta;
      const double b0_prev = b0;
      if (full_pass) {
        pass(r, full, opt.tol, 4);
      } else {
        active = active_coords();
        pass(r, active, opt.tol, 4);
      }
      ++passes;

      double delta = std::max((beta - beta_prev).lpNorm<Eigen::Infinity>(),
                              std::abs(b0 - b0_prev));
      double next_obj = objective(r);
      if (delta >= opt.tol)
        next_obj = extrapolate(r, beta_prev, b0_prev, eta_prev, next_obj,
                               last_factor);
      if (passes % snap_window == 0) {
        next_obj = extrapolate(r, beta_snap, b0_snap, eta_snap, next_obj,
                               last_factor_long);
        beta_snap = beta;
        eta_snap = eta;
        b0_snap = b0;
      }
      if (next_obj > obj + 1e-9 * (1.0 + std::abs(obj)))
        throw ComputationError("penalized objective increased within a fit");
      obj = next_obj;

      if (beta.lpNorm<Eigen::Infinity>() > opt.divergence_bound) break;

      delta = std::max((beta - beta_prev).lpNorm<Eigen::Infinity>(),
                       std::abs(b0 - b0_prev));
      if (delta < opt.tol) {
        if (!full_pass) {
          full_pass = true;  // confirm with a full sweep before certifying
          continue;
        }
        kkt = kkt_violation(r);
        if (kkt <= opt.kkt_target) {
          converged = true;
          break;
        }
        // stationarity not yet certified; keep iterating on all coordinates
        full_pass = true;
      } else {
        full_pass = false;
      }
    }

    // An unpenalized fit that drives the likelihood to a numerically perfect
    // separation has no finite MLE; flag it instead of reporting the
    // saturated point.
    if (converged && r == 0.0 && obj < 1e-10 &&
        beta.lpNorm<Eigen::Infinity>() > 10.0)
      converged = false;

    LassoFit fit;
    fit.r = r;
    fit.intercept = b0;
    fit.beta = beta;
    fit.objective = obj;
    fit.iterations = passes;
    fit.converged = converged;
    fit.kkt_violation = std::isfinite(kkt) ? kkt : kkt_violation(r);
    record_fit(fit.converged, fit.kkt_violation);
    return fit;
  }
};

void check_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size())
    throw ValidationError("x rows and y length disagree");
  if (x.rows() < 2 || x.cols() < 1) throw ValidationError("empty problem");
  const double ybar = y.mean();
  if (ybar <= 0.0 || ybar >= 1.0)
    throw ValidationError("degenerate response: y is constant");
}

}  // namespace

double mean_nll(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                double intercept, const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = x * beta;
  eta.array() += intercept;
  double nll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    nll += softplus(eta[i]) - y[i] * eta[i];
  return nll / static_cast<double>(x.rows());
}

Eigen::VectorXd mean_nll_gradient(const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, double intercept,
                                  const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = x * beta;
  eta.array() += intercept;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    resid[i] = sigmoid(eta[i]) - y[i];
  return x.transpose() * resid / static_cast<double>(x.rows());
}

double mean_nll_intercept_gradient(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, double intercept,
                                   const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = x * beta;
  eta.array() += intercept;
  double s = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) s += sigmoid(eta[i]) - y[i];
  return s / static_cast<double>(x.rows());
}

double lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  check_inputs(x, y);
  const Eigen::VectorXd centered = y.array() - y.mean();
  return (x.transpose() * centered).lpNorm<Eigen::Infinity>() /
         static_cast<double>(x.rows());
}

LassoFit fit_logistic_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            double r, const LassoFit* warm,
                            const SolverOptions& opt) {
  check_inputs(x, y);
  if (r < 0.0) throw ValidationError("penalty level must be nonnegative");
  Solver solver(x, y);
  if (warm != nullptr) {
    if (warm->beta.size() != x.cols())
      throw ValidationError("warm start size mismatch");
    solver.set_start(warm->intercept, warm->beta);
  } else {
    const double ybar = y.mean();
    solver.set_start(std::log(ybar / (1.0 - ybar)),
                     Eigen::VectorXd::Zero(x.cols()));
  }
  return solver.solve(r, opt);
}

Eigen::VectorXd make_grid(double lambda_max, int grid_size, double min_ratio) {
  if (grid_size < 2) throw ValidationError("grid size must be at least 2");
  if (min_ratio <= 0.0 || min_ratio >= 1.0)
    throw ValidationError("min_ratio must lie in (0, 1)");
  if (lambda_max <= 0.0) throw ValidationError("lambda_max must be positive");
  Eigen::VectorXd grid(grid_size);
  const double log_top = std::log(lambda_max);
  const double log_bot = std::log(lambda_max * min_ratio);
  for (int i = 0; i < grid_size; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(grid_size - 1);
    grid[i] = std::exp(log_top + t * (log_bot - log_top));
  }
  // a hair above lambda_max so the exact KKT tie at the null solution cannot
  // round to a spurious 1-ulp coefficient
  grid[0] = lambda_max * (1.0 + 1e-12);
  grid[grid_size - 1] = lambda_max * min_ratio;
  return grid;
}

LassoPath fit_path_on_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& grid,
                           const SolverOptions& opt, int stop_index) {
  check_inputs(x, y);
  if (grid.size() < 1) throw ValidationError("empty grid");
  for (Eigen::Index i = 1; i < grid.size(); ++i)
    if (grid[i] >= grid[i - 1])
      throw ValidationError("grid must be strictly decreasing");
  const int last =
      stop_index < 0 ? static_cast<int>(grid.size()) - 1 : stop_index;

  LassoPath path;
  path.grid = grid;
  path.entry_level = Eigen::VectorXd::Zero(x.cols());

  Solver solver(x, y);
  const double ybar = y.mean();
  solver.set_start(std::log(ybar / (1.0 - ybar)),
                   Eigen::VectorXd::Zero(x.cols()));

  for (int g = 0; g <= last; ++g) {
    LassoFit fit = solver.solve(grid[g], opt);
    if (!fit.converged) {
      path.truncated = true;
      path.fits.push_back(std::move(fit));
      break;
    }
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (fit.beta[j] != 0.0 && path.entry_level[j] == 0.0)
        path.entry_level[j] = grid[g];
    path.fits.push_back(std::move(fit));
  }

  // oscillation check: adjacent coefficient jumps far above the typical step
  std::vector<double> steps;
  for (size_t g = 1; g < path.fits.size(); ++g)
    steps.push_back((path.fits[g].beta - path.fits[g - 1].beta)
                        .lpNorm<Eigen::Infinity>());
  if (steps.size() >= 4) {
    std::vector<double> sorted = steps;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    if (median > 0.0)
      for (double s : steps)
        if (s > 10.0 * median) path.continuity_warning = true;
  }
  return path;
}

LassoPath fit_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   int grid_size, double min_ratio, const SolverOptions& opt) {
  return fit_path_on_grid(x, y, make_grid(lambda_max(x, y), grid_size, min_ratio),
                          opt);
}

CrossValidationResult cross_validate_lambda(const Eigen::MatrixXd& x,
                                            const Eigen::VectorXd& y,
                                            const FoldAssignment& folds,
                                            const Eigen::VectorXd& grid,
                                            const SolverOptions& opt,
                                            const LassoPath* warm_path) {
  check_inputs(x, y);
  if (folds.n() != x.rows())
    throw ValidationError("fold assignment does not match x rows");
  if (grid.size() < 1) throw ValidationError("empty grid");
  for (Eigen::Index i = 1; i < grid.size(); ++i)
    if (grid[i] >= grid[i - 1])
      throw ValidationError("grid must be strictly decreasing");

  const int g_count = static_cast<int>(grid.size());
  Eigen::VectorXd curve = Eigen::VectorXd::Zero(g_count);

  for (int fold = 1; fold <= folds.k; ++fold) {
    const auto train = fold_training_rows(folds, fold);
    const auto val = fold_validation_rows(folds, fold);
    Eigen::MatrixXd xt(train.size(), x.cols());
    Eigen::VectorXd yt(train.size());
    for (size_t i = 0; i < train.size(); ++i) {
      xt.row(static_cast<Eigen::Index>(i)) = x.row(train[i]);
      yt[static_cast<Eigen::Index>(i)] = y[train[i]];
    }
    const double ybar = yt.mean();
    if (ybar <= 0.0 || ybar >= 1.0)
      throw ValidationError("fold " + std::to_string(fold) +
                            " has constant training response");
    Eigen::MatrixXd xv(val.size(), x.cols());
    Eigen::VectorXd yv(val.size());
    for (size_t i = 0; i < val.size(); ++i) {
      xv.row(static_cast<Eigen::Index>(i)) = x.row(val[i]);
      yv[static_cast<Eigen::Index>(i)] = y[val[i]];
    }

    Solver solver(xt, yt);
    solver.set_start(std::log(ybar / (1.0 - ybar)),
                     Eigen::VectorXd::Zero(x.cols()));
    for (int g = 0; g < g_count; ++g) {
      if (warm_path != nullptr &&
          g < static_cast<int>(warm_path->fits.size()) &&
          warm_path->fits[static_cast<size_t>(g)].converged) {
        const LassoFit& ref = warm_path->fits[static_cast<size_t>(g)];
        const double obj_ref =
            mean_nll(xt, yt, ref.intercept, ref.beta) +
            grid[g] * ref.beta.lpNorm<1>();
        if (obj_ref < solver.objective(grid[g]))
          solver.set_start(ref.intercept, ref.beta);
      }
      const LassoFit fit = solver.solve(grid[g], opt);
      if (!fit.converged)
        throw ComputationError("cross-validation fit failed to converge at r=" +
                               std::to_string(grid[g]));
      curve[g] += mean_nll(xv, yv, fit.intercept, fit.beta);
    }
  }
  curve /= static_cast<double>(folds.k);

  CrossValidationResult out;
  out.cv_curve = curve;
  out.r_star_index = 0;
  for (int g = 1; g < g_count; ++g)
    if (curve[g] < curve[out.r_star_index]) out.r_star_index = g;
  out.r_star = grid[out.r_star_index];
  return out;
}

SolverAudit solver_audit() {
  Audit& a = audit();
  std::lock_guard<std::mutex> lock(a.mu);
  return {a.converged, a.nonconverged, a.max_kkt};
}

void reset_solver_audit() {
  Audit& a = audit();
  std::lock_guard<std::mutex> lock(a.mu);
  a.converged = 0;
  a.nonconverged = 0;
  a.max_kkt = 0.0;
}

}  // namespace knockoff
