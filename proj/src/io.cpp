#include "knockoff/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "knockoff/errors.hpp"

namespace knockoff {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_matrix_csv(const Eigen::MatrixXd& m,
                      const std::vector<std::string>& column_names,
                      const std::string& path) {
  if (static_cast<Eigen::Index>(column_names.size()) != m.cols())
    throw ValidationError("column name count does not match matrix");
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  for (size_t j = 0; j < column_names.size(); ++j) {
    if (j > 0) out << ',';
    out << csv_quote(column_names[j]);
  }
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

namespace {

nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json indices_1based(const std::vector<int>& idx) {
  nlohmann::json arr = nlohmann::json::array();
  for (int j : idx) arr.push_back(j + 1);
  return arr;
}

}  // namespace

nlohmann::json knockoff_model_json(const KnockoffModel& model,
                                   const KnockoffCopy& copy) {
  nlohmann::json j;
  j["s"] = std::vector<double>(model.s.data(), model.s.data() + model.s.size());
  j["lambda_min_v"] = model.lambda_min_v;
  j["shrinkage"] = model.shrinkage;
  j["slack"] = model.slack;
  j["seed"] = copy.seed;
  j["parent_checksum"] = hex64(copy.parent_hash);
  j["n"] = copy.x_tilde.rows();
  j["p"] = copy.x_tilde.cols();
  return j;
}

nlohmann::json selection_json(const PipelineResult& result,
                              const std::vector<std::string>& column_names,
                              Statistic statistic) {
  const SelectionResult& sel = result.selection;
  nlohmann::json j;
  j["kind"] = to_string(statistic);
  j["variant"] = to_string(sel.variant);
  j["q"] = sel.q;
  j["k"] = static_cast<int>(sel.runs.size());
  j["p"] = sel.p;
  j["threshold"] = sel.runs.size() == 1 ? finite_or_null(sel.threshold)
                                        : nlohmann::json(nullptr);
  j["parent_checksum"] = hex64(result.parent_hash);

  nlohmann::json selected = nlohmann::json::array();
  for (int idx : sel.selected) {
    selected.push_back({{"index", idx + 1},
                        {"name", column_names[static_cast<size_t>(idx)]}});
  }
  j["selected"] = selected;

  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : result.runs) {
    nlohmann::json r;
    r["seed"] = run.record.seed;
    r["q"] = run.record.q;
    r["threshold"] = finite_or_null(run.record.threshold);
    r["selected"] = indices_1based(run.record.selected);
    if (std::isfinite(run.r_star)) r["r_star"] = run.r_star;
    r["w"] = std::vector<double>(run.w.w.data(), run.w.w.data() + run.w.w.size());
    runs.push_back(std::move(r));
  }
  j["runs"] = runs;
  return j;
}

nlohmann::json refit_json(const RefitEstimates& fit,
                          const std::vector<std::string>& column_names) {
  nlohmann::json j;
  j["kind"] = fit.kind == RefitKind::logistic ? "logistic" : "ols";
  switch (fit.scale) {
    case CoefficientScale::standardized_all:
      j["scale"] = "standardized";
      break;
    case CoefficientScale::standardized_continuous_only:
      j["scale"] = "continuous-only";
      break;
    case CoefficientScale::raw:
      j["scale"] = "raw";
      break;
  }
  j["support"] = indices_1based(fit.support);
  j["certificate_residual"] = fit.certificate_residual;

  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < fit.coef.size(); ++i) {
    nlohmann::json row;
    row["term"] = i == 0 ? std::string("(intercept)")
                         : column_names[static_cast<size_t>(
                               fit.support[static_cast<size_t>(i - 1)])];
    row["estimate"] = fit.coef[i];
    row["se"] = finite_or_null(fit.se[i]);
    row["p_value"] = finite_or_null(fit.p_values[i]);
    row["stars"] = significance_stars(fit.p_values[i]);
    if (i > 0 && fit.marginal_effects) {
      row["marginal_effect"] = (*fit.marginal_effects)[i - 1];
      row["marginal_effect_se"] = (*fit.marginal_effect_se)[i - 1];
    }
    rows.push_back(std::move(row));
  }
  j["coefficients"] = rows;
  return j;
}

nlohmann::json prediction_json(const PredictionReport& report) {
  nlohmann::json j;
  j["method"] = report.method_label;
  j["model_size"] = report.model_size;
  j["pred_error"] = report.pred_error;
  j["folds"] = report.folds.k;
  j["failed_folds"] = report.failed_folds;
  return j;
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace knockoff
