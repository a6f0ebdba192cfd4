#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "knockoff/dataset.hpp"
#include "knockoff/knockoff_filter.hpp"
#include "knockoff/pipeline.hpp"

namespace knockoff {

enum class CovarianceKind { identity, equicorrelated, ar1 };

CovarianceKind covariance_from_string(const std::string& s);
std::string to_string(CovarianceKind k);

struct Scenario {
  int n = 500;
  int p = 50;
  int s0 = 10;          // true support size
  double amplitude = 10.0;
  CovarianceKind correlation = CovarianceKind::identity;
  double rho = 0.0;
  double q = 0.1;
  int k = 3;
  Variant variant = Variant::knockoff_plus;
  Statistic statistic = Statistic::lcd_cv;
  int replicates = 100;
  std::uint64_t base_seed = 1;
  int grid_size = 100;
  double min_ratio = 1e-4;
  int folds = 10;
  double slack = 0.999;
  int threads = 0;  // 0 = hardware concurrency

  PipelineConfig pipeline_config() const;
};

void validate_scenario(const Scenario& sc);

// Flat key=value text, one key per line, '#' comments.
Scenario load_scenario(const std::string& path);

struct SyntheticData {
  Dataset data;  // standardized
  std::vector<int> true_support;  // 0-based, sorted
  Eigen::VectorXd beta_star;
};

// X rows i.i.d. N(0, Sigma) then standardized; beta* has s0 entries of
// +-amplitude at uniform positions; y_i ~ Bernoulli(sigmoid(x_i' beta*)).
// Deterministic given (base_seed, replicate); a degenerate y is resampled
// once, then rejected.
SyntheticData generate_synthetic(const Scenario& sc, int replicate);

struct SelectionMetrics {
  int tp = 0, fp = 0, fn = 0, hd = 0;
  double fdp = 0.0;
  double power = 0.0;
  bool power_defined = true;  // false when the true support is empty
};

SelectionMetrics evaluate_selection(const std::vector<int>& selected,
                                    const std::vector<int>& true_support,
                                    int p);

struct ReplicateOutcome {
  int replicate = 0;
  bool failed = false;
  std::string error;
  int selected_size = 0;
  SelectionMetrics metrics;
};

struct MonteCarloReport {
  std::vector<ReplicateOutcome> replicates;
  int completed = 0;
  int failures = 0;
  double mean_fdp = 0.0;
  double fdp_se = 0.0;  // sample SD / sqrt(completed)
  double mean_power = 0.0;
  double power_se = 0.0;
  double runtime_seconds = 0.0;  // not serialized; outputs stay reproducible
};

// Runs the full pipeline R times with replicate-indexed seeds. Failed
// replicates are excluded; more than 5% failures fails the report.
MonteCarloReport run_monte_carlo(const Scenario& sc);

void write_replicates_csv(const MonteCarloReport& report,
                          const std::string& path);
void write_summary_json(const Scenario& sc, const MonteCarloReport& report,
                        const std::string& path);

}  // namespace knockoff
