#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "knockoff/dataset.hpp"
#include "knockoff/gaussian_knockoffs.hpp"
#include "knockoff/inference.hpp"
#include "knockoff/knockoff_filter.hpp"

namespace knockoff {

struct PipelineConfig {
  double q = 0.1;
  int k = 3;
  Variant variant = Variant::knockoff_plus;
  Statistic statistic = Statistic::lcd_cv;
  int grid_size = 100;
  double min_ratio = 1e-4;
  int cv_folds = 10;
  double slack = 0.999;
  int threads = 1;  // parallelism across the k runs
};

struct KnockoffRunDiagnostics {
  RunRecord record;
  WStatistics w;
  double r_star = std::numeric_limits<double>::quiet_NaN();  // lcd-cv only
};

struct PipelineResult {
  SelectionResult selection;
  std::vector<KnockoffRunDiagnostics> runs;
  std::uint64_t parent_hash = 0;
};

// Full knockoff selection: k independent knockoff draws, augmented penalized
// fits, W statistics, per-run thresholds at q/k, union aggregation.
PipelineResult select_knockoff(const Dataset& d, const PipelineConfig& cfg,
                               std::uint64_t seed);

// Plain lasso baseline: support = nonzero coefficients at the
// cross-validated penalty on the unaugmented design.
std::vector<int> lasso_cv_support(const Dataset& d, const PipelineConfig& cfg,
                                  std::uint64_t seed);

// "FDR LSM", "AFDR LCD_CV", ... matching k and the statistic.
std::string method_label(const PipelineConfig& cfg);

// Selector adapters for cv_prediction_error.
Selector knockoff_selector(const PipelineConfig& cfg);
Selector lasso_cv_selector(const PipelineConfig& cfg);
Selector full_selector();
Selector empty_selector();

}  // namespace knockoff
