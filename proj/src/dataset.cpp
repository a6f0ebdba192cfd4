#include "knockoff/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "knockoff/errors.hpp"
#include "knockoff/rng.hpp"

namespace knockoff {

namespace {

std::vector<std::string> split_csv_line(const std::string& line, int row) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted)
    throw ValidationError("unterminated quote in CSV row " + std::to_string(row));
  fields.push_back(field);
  return fields;
}

double parse_cell(const std::string& cell, int row, const std::string& column) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end != begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  double value = 0.0;
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end || begin == end)
    throw ValidationError("non-numeric cell at row " + std::to_string(row) +
                          ", column " + column);
  return value;
}

}  // namespace

bool Dataset::is_binary_column(Eigen::Index j) const {
  const Eigen::VectorXd raw = raw_column(j);
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    if (std::abs(raw[i]) > 1e-9 && std::abs(raw[i] - 1.0) > 1e-9) return false;
  }
  return true;
}

void validate_dataset(const Dataset& d) {
  const Eigen::Index n = d.x.rows(), p = d.x.cols();
  if (n < 2) throw ValidationError("dataset needs n >= 2");
  if (p < 1) throw ValidationError("dataset needs p >= 1");
  if (d.y.size() != n) throw ValidationError("y length does not match x rows");
  if (static_cast<Eigen::Index>(d.column_names.size()) != p)
    throw ValidationError("column_names length does not match x columns");
  if (!d.x.allFinite()) throw ValidationError("non-finite entry in x");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d.y[i] != 0.0 && d.y[i] != 1.0)
      throw ValidationError("non-binary response at row " + std::to_string(i + 1));
  }
  if (d.column_means.size() != p || d.column_scales.size() != p)
    throw ValidationError("affine map vectors must have length p");
  if (d.standardized) {
    const double nd = static_cast<double>(n);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double mean = d.x.col(j).mean();
      const double ssq = d.x.col(j).squaredNorm();
      if (std::abs(mean) > 1e-10)
        throw ValidationError("standardized column " + d.column_names[j] +
                              " has nonzero mean");
      if (std::abs(ssq - nd) / nd > 1e-8)
        throw ValidationError("standardized column " + d.column_names[j] +
                              " has sum of squares != n");
    }
  }
}

Dataset make_dataset(Eigen::MatrixXd x, Eigen::VectorXd y,
                     std::vector<std::string> column_names) {
  Dataset d;
  d.x = std::move(x);
  d.y = std::move(y);
  d.column_names = std::move(column_names);
  d.standardized = false;
  d.column_means = Eigen::VectorXd::Zero(d.x.cols());
  d.column_scales = Eigen::VectorXd::Ones(d.x.cols());
  validate_dataset(d);
  return d;
}

Dataset load_csv(const std::string& path, const std::string& response_column) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty CSV: " + path);
  const std::vector<std::string> header = split_csv_line(line, 1);

  int response_idx = -1;
  for (size_t j = 0; j < header.size(); ++j) {
    if (header[j] == response_column) response_idx = static_cast<int>(j);
  }
  if (response_idx < 0)
    throw ValidationError("missing response column: " + response_column);

  const int total = static_cast<int>(header.size());
  std::vector<std::vector<double>> cols(static_cast<size_t>(total));
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() && in.eof()) break;
    const auto fields = split_csv_line(line, row);
    if (static_cast<int>(fields.size()) != total)
      throw ValidationError("row " + std::to_string(row) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(total));
    for (int j = 0; j < total; ++j)
      cols[static_cast<size_t>(j)].push_back(
          parse_cell(fields[static_cast<size_t>(j)], row, header[static_cast<size_t>(j)]));
  }
  const int n = static_cast<int>(cols[0].size());
  if (n < 2) throw ValidationError("CSV has fewer than 2 data rows");

  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double v = cols[static_cast<size_t>(response_idx)][static_cast<size_t>(i)];
    if (v != 0.0 && v != 1.0)
      throw ValidationError("non-binary response in column " + response_column);
    y[i] = v;
  }

  const int p = total - 1;
  if (p < 1) throw ValidationError("no predictor columns besides the response");
  Eigen::MatrixXd x(n, p);
  std::vector<std::string> names;
  names.reserve(static_cast<size_t>(p));
  int out = 0;
  for (int j = 0; j < total; ++j) {
    if (j == response_idx) continue;
    for (int i = 0; i < n; ++i)
      x(i, out) = cols[static_cast<size_t>(j)][static_cast<size_t>(i)];
    const double lo = x.col(out).minCoeff(), hi = x.col(out).maxCoeff();
    if (lo == hi)
      throw ValidationError("constant column " + header[static_cast<size_t>(j)]);
    names.push_back(header[static_cast<size_t>(j)]);
    ++out;
  }
  return make_dataset(std::move(x), std::move(y), std::move(names));
}

Dataset standardize(const Dataset& d) {
  if (d.standardized) throw ValidationError("dataset already standardized");
  validate_dataset(d);
  const Eigen::Index n = d.n(), p = d.p();
  Dataset out = d;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double mean = d.x.col(j).mean();
    Eigen::VectorXd centered = d.x.col(j).array() - mean;
    const double rms = std::sqrt(centered.squaredNorm() / static_cast<double>(n));
    if (rms <= 0.0 || !std::isfinite(rms))
      throw ValidationError("zero variance column " + d.column_names[j]);
    out.x.col(j) = centered / rms;
    out.column_means[j] = mean;
    out.column_scales[j] = rms;
  }
  out.standardized = true;
  return out;
}

std::uint64_t dataset_checksum(const Dataset& d) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto feed = [&h](const void* data, size_t bytes) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < bytes; ++i) {
      h ^= b[i];
      h *= 0x100000001B3ULL;
    }
  };
  const std::uint64_t n = static_cast<std::uint64_t>(d.n());
  const std::uint64_t p = static_cast<std::uint64_t>(d.p());
  feed(&n, sizeof n);
  feed(&p, sizeof p);
  feed(d.x.data(), sizeof(double) * static_cast<size_t>(d.x.size()));
  feed(d.y.data(), sizeof(double) * static_cast<size_t>(d.y.size()));
  return h;
}

FoldAssignment make_folds(int n, int k,
                          const std::optional<Eigen::VectorXd>& stratify_by,
                          std::uint64_t seed) {
  if (k > n) throw ValidationError("fold count K exceeds n");
  if (k < 2) throw ValidationError("fold count K must be at least 2");
  if (stratify_by && stratify_by->size() != n)
    throw ValidationError("stratification vector length does not match n");

  SequentialRng rng(mix_seed(seed, 0x666f6c64ULL));  // "fold"
  auto shuffled = [&rng](std::vector<int> v) {
    for (size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[rng.next_below(i)]);
    return v;
  };

  std::vector<std::vector<int>> groups;
  if (stratify_by) {
    std::vector<int> pos, neg;
    for (int i = 0; i < n; ++i) {
      const double v = (*stratify_by)[i];
      if (v != 0.0 && v != 1.0)
        throw ValidationError("stratification vector must be binary");
      (v == 1.0 ? pos : neg).push_back(i);
    }
    groups.push_back(std::move(pos));
    groups.push_back(std::move(neg));
  } else {
    std::vector<int> all(static_cast<size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    groups.push_back(std::move(all));
  }

  FoldAssignment f;
  f.k = k;
  f.fold_of.assign(static_cast<size_t>(n), 0);
  int cursor = 0;
  for (auto& g : groups) {
    for (int idx : shuffled(std::move(g))) {
      f.fold_of[static_cast<size_t>(idx)] = cursor % k + 1;
      ++cursor;
    }
  }
  return f;
}

std::vector<int> fold_validation_rows(const FoldAssignment& f, int fold) {
  std::vector<int> rows;
  for (int i = 0; i < f.n(); ++i)
    if (f.fold_of[static_cast<size_t>(i)] == fold) rows.push_back(i);
  return rows;
}

std::vector<int> fold_training_rows(const FoldAssignment& f, int fold) {
  std::vector<int> rows;
  for (int i = 0; i < f.n(); ++i)
    if (f.fold_of[static_cast<size_t>(i)] != fold) rows.push_back(i);
  return rows;
}

}  // namespace knockoff
