#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace knockoff {

// Design matrix plus binary response. `column_means` / `column_scales`
// record the affine map so raw values are recoverable:
//   raw[:, j] = x[:, j] * column_scales[j] + column_means[j].
// For an unstandardized dataset the map is the identity.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;  // entries in {0, 1}
  std::vector<std::string> column_names;
  bool standardized = false;
  Eigen::VectorXd column_means;
  Eigen::VectorXd column_scales;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }

  Eigen::VectorXd raw_column(Eigen::Index j) const {
    return x.col(j) * column_scales[j] +
           Eigen::VectorXd::Constant(x.rows(), column_means[j]);
  }

  // True when the raw values of column j are all 0 or 1.
  bool is_binary_column(Eigen::Index j) const;
};

// Validating constructor. Initializes the identity affine map.
Dataset make_dataset(Eigen::MatrixXd x, Eigen::VectorXd y,
                     std::vector<std::string> column_names);

// Throws ValidationError if any Dataset invariant is violated.
void validate_dataset(const Dataset& d);

// Reads an RFC-4180 style CSV (header required, '.' decimal separator, no
// missing values). The response column must contain only 0/1; every other
// column must be numeric and non-constant.
Dataset load_csv(const std::string& path, const std::string& response_column);

// Centers each column to mean 0 and rescales so its sum of squares equals n,
// i.e. (X'X)_jj = n. The response is never transformed.
Dataset standardize(const Dataset& d);

// FNV-1a over dimensions and the raw bytes of x and y; used for knockoff
// provenance.
std::uint64_t dataset_checksum(const Dataset& d);

struct FoldAssignment {
  std::vector<int> fold_of;  // values in {1..k}
  int k = 0;

  int n() const { return static_cast<int>(fold_of.size()); }
};

// Deterministic K-fold split. Fold sizes differ by at most 1; when
// `stratify_by` (a 0/1 vector) is given, each fold's positive count differs
// from the proportional share by at most 1.
FoldAssignment make_folds(int n, int k,
                          const std::optional<Eigen::VectorXd>& stratify_by,
                          std::uint64_t seed);

std::vector<int> fold_validation_rows(const FoldAssignment& f, int fold);
std::vector<int> fold_training_rows(const FoldAssignment& f, int fold);

}  // namespace knockoff
