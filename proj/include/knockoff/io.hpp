#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "json.hpp"

#include "knockoff/gaussian_knockoffs.hpp"
#include "knockoff/inference.hpp"
#include "knockoff/pipeline.hpp"

namespace knockoff {

// Round-trip exact, locale-independent ("%.17g").
std::string format_double(double v);

// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_quote(const std::string& s);

void write_matrix_csv(const Eigen::MatrixXd& m,
                      const std::vector<std::string>& column_names,
                      const std::string& path);

nlohmann::json knockoff_model_json(const KnockoffModel& model,
                                   const KnockoffCopy& copy);

// Selection result with per-run provenance; indices are 1-based in files.
nlohmann::json selection_json(const PipelineResult& result,
                              const std::vector<std::string>& column_names,
                              Statistic statistic);

nlohmann::json refit_json(const RefitEstimates& fit,
                          const std::vector<std::string>& column_names);

nlohmann::json prediction_json(const PredictionReport& report);

void write_json(const nlohmann::json& j, const std::string& path);

}  // namespace knockoff
