#include "knockoff/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "knockoff/errors.hpp"
#include "knockoff/parallel.hpp"
#include "knockoff/rng.hpp"
#include "knockoff/sparse_glm.hpp"

namespace knockoff {

namespace {

// Fold fits only rank penalty levels, so they run at a slightly looser
// stopping rule; the KKT certificate stays within the 1e-4 tolerance.
SolverOptions cv_fold_options() {
  SolverOptions opt;
  opt.tol = 1e-6;
  opt.kkt_target = 9e-5;
  return opt;
}

void check_config(const PipelineConfig& cfg) {
  if (cfg.q < 0.0 || cfg.q > 1.0) throw ValidationError("q must lie in [0, 1]");
  if (cfg.k < 1) throw ValidationError("k must be at least 1");
  if (cfg.grid_size < 2) throw ValidationError("grid size must be at least 2");
  if (cfg.min_ratio <= 0.0 || cfg.min_ratio >= 1.0)
    throw ValidationError("min_ratio must lie in (0, 1)");
  if (cfg.cv_folds < 2) throw ValidationError("cv folds must be at least 2");
  if (cfg.slack <= 0.0 || cfg.slack > 1.0)
    throw ValidationError("slack must lie in (0, 1]");
}

// One knockoff run: draw a copy, fit the augmented problem, compute W.
KnockoffRunDiagnostics run_once(const Dataset& d, const KnockoffModel& model,
                                const PipelineConfig& cfg,
                                std::uint64_t run_seed) {
  const KnockoffCopy copy = sample_knockoffs(d, model, mix_seed(run_seed, 1));

  Eigen::MatrixXd augmented(d.n(), 2 * d.p());
  augmented.leftCols(d.p()) = d.x;
  augmented.rightCols(d.p()) = copy.x_tilde;

  KnockoffRunDiagnostics diag;
  diag.record.seed = run_seed;

  const LassoPath path = fit_path(augmented, d.y, cfg.grid_size, cfg.min_ratio);
  if (path.truncated)
    throw ComputationError("augmented path fit failed to converge");

  if (cfg.statistic == Statistic::lsm) {
    diag.w = lsm_statistics(path);
  } else {
    const FoldAssignment folds = make_folds(
        static_cast<int>(d.n()), cfg.cv_folds, d.y, mix_seed(run_seed, 2));
    const CrossValidationResult cv = cross_validate_lambda(
        augmented, d.y, folds, path.grid, cv_fold_options(), &path);
    diag.w = lcd_statistics(path.fits[static_cast<size_t>(cv.r_star_index)]);
    diag.r_star = cv.r_star;
  }
  return diag;
}

}  // namespace

PipelineResult select_knockoff(const Dataset& d, const PipelineConfig& cfg,
                               std::uint64_t seed) {
  check_config(cfg);
  if (!d.standardized)
    throw ValidationError("knockoff selection needs a standardized dataset");

  const KnockoffModel model = build_knockoff_model(d, cfg.slack);
  const double q_run = cfg.q / static_cast<double>(cfg.k);

  PipelineResult result;
  result.parent_hash = dataset_checksum(d);
  result.runs.resize(static_cast<size_t>(cfg.k));

  parallel_for(cfg.k, cfg.threads, [&](int i) {
    const std::uint64_t run_seed = mix_seed(seed, static_cast<std::uint64_t>(i) + 1);
    KnockoffRunDiagnostics diag = run_once(d, model, cfg, run_seed);
    SelectionResult single = threshold(diag.w, q_run, cfg.variant);
    diag.record.q = q_run;
    diag.record.threshold = single.threshold;
    diag.record.selected = single.selected;
    result.runs[static_cast<size_t>(i)] = std::move(diag);
  });

  std::vector<SelectionResult> singles;
  singles.reserve(static_cast<size_t>(cfg.k));
  for (const auto& run : result.runs) {
    SelectionResult s;
    s.selected = run.record.selected;
    s.threshold = run.record.threshold;
    s.q = run.record.q;
    s.p = static_cast<int>(d.p());
    s.variant = cfg.variant;
    RunRecord rec = run.record;
    s.runs.push_back(std::move(rec));
    singles.push_back(std::move(s));
  }
  result.selection = aggregate_afdr(singles);
  return result;
}

std::vector<int> lasso_cv_support(const Dataset& d, const PipelineConfig& cfg,
                                  std::uint64_t seed) {
  check_config(cfg);
  if (!d.standardized)
    throw ValidationError("lasso selection needs a standardized dataset");

  const LassoPath path = fit_path(d.x, d.y, cfg.grid_size, cfg.min_ratio);
  if (path.truncated)
    throw ComputationError("lasso path fit failed to converge");
  const FoldAssignment folds = make_folds(static_cast<int>(d.n()), cfg.cv_folds,
                                          d.y, mix_seed(seed, 2));
  const CrossValidationResult cv = cross_validate_lambda(
      d.x, d.y, folds, path.grid, cv_fold_options(), &path);

  std::vector<int> support;
  const Eigen::VectorXd& beta =
      path.fits[static_cast<size_t>(cv.r_star_index)].beta;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    if (beta[j] != 0.0) support.push_back(static_cast<int>(j));
  return support;
}

std::string method_label(const PipelineConfig& cfg) {
  const std::string scheme = cfg.k > 1 ? "AFDR" : "FDR";
  const std::string stat = cfg.statistic == Statistic::lsm ? "LSM" : "LCD_CV";
  return scheme + " " + stat;
}

Selector knockoff_selector(const PipelineConfig& cfg) {
  return [cfg](const Dataset& d, std::uint64_t seed) {
    return select_knockoff(d, cfg, seed).selection.selected;
  };
}

Selector lasso_cv_selector(const PipelineConfig& cfg) {
  return [cfg](const Dataset& d, std::uint64_t seed) {
    return lasso_cv_support(d, cfg, seed);
  };
}

Selector full_selector() {
  return [](const Dataset& d, std::uint64_t) {
    std::vector<int> all(static_cast<size_t>(d.p()));
    for (int j = 0; j < d.p(); ++j) all[static_cast<size_t>(j)] = j;
    return all;
  };
}

Selector empty_selector() {
  return [](const Dataset&, std::uint64_t) { return std::vector<int>{}; };
}

}  // namespace knockoff
