#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "knockoff/sparse_glm.hpp"

namespace knockoff {

// lsm: signed max of the path entry levels of a variable and its knockoff.
// lcd_cv: |beta_j| - |beta_{p+j}| at the cross-validated penalty.
enum class Statistic { lsm, lcd_cv };

enum class Variant { knockoff, knockoff_plus };

std::string to_string(Statistic s);   // "lsm" / "lcd-cv"
std::string to_string(Variant v);     // "knockoff" / "knockoff+"
Statistic statistic_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);

struct WStatistics {
  Eigen::VectorXd w;
  Statistic kind = Statistic::lsm;
  Eigen::VectorXd z;
  Eigen::VectorXd z_tilde;
};

// z_j / z_tilde_j are the largest grid penalties at which variable j and its
// knockoff are active; w_j = max(z_j, z~_j) * sign(z_j - z~_j), sign(0) = 0.
WStatistics lsm_statistics(const LassoPath& path);

// w_j = |beta_j| - |beta_{p+j}| from a converged fit over [X X~].
WStatistics lcd_statistics(const LassoFit& fit);

struct RunRecord {
  std::uint64_t seed = 0;
  double q = 0.0;
  double threshold = std::numeric_limits<double>::infinity();
  std::vector<int> selected;  // 0-based, sorted
};

struct SelectionResult {
  std::vector<int> selected;  // 0-based, sorted
  double threshold = std::numeric_limits<double>::infinity();  // +inf: no
                              // feasible t; NaN for k>1 aggregates
  double q = 0.0;
  int p = 0;
  Variant variant = Variant::knockoff_plus;
  std::vector<RunRecord> runs;
};

// Data-dependent threshold over the candidate set {|w_j| : w_j != 0}:
//   knockoff:  T  = min{t : #{w_j <= -t} / #{w_j >= t} <= q}
//   knockoff+: T+ = min{t : (1 + #{w_j <= -t}) / max(#{w_j >= t}, 1) <= q}
// No feasible t yields threshold +inf and an empty selection.
SelectionResult threshold(const WStatistics& w, double q, Variant variant);

// Union of k single-run selections run at levels q_1..q_k (sum = total q).
// k = 1 returns the input run unchanged.
SelectionResult aggregate_afdr(const std::vector<SelectionResult>& runs);

}  // namespace knockoff
