// kfilter: controlled variable selection for binary outcomes with Gaussian
// model-X knockoffs, FDR/AFDR thresholds, refits, and a Monte Carlo harness.
//
// Exit codes: 0 success, 1 computational failure, 2 input validation failure.
// All randomness flows from --seed; reruns with identical inputs and flags
// produce byte-identical output files.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "knockoff/dataset.hpp"
#include "knockoff/errors.hpp"
#include "knockoff/gaussian_knockoffs.hpp"
#include "knockoff/inference.hpp"
#include "knockoff/io.hpp"
#include "knockoff/knockoff_filter.hpp"
#include "knockoff/parallel.hpp"
#include "knockoff/pipeline.hpp"
#include "knockoff/rng.hpp"
#include "knockoff/sim_harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonInput {
  std::string input;
  std::string response = "y";
};

knockoff::Dataset load_standardized(const CommonInput& in) {
  return knockoff::standardize(knockoff::load_csv(in.input, in.response));
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw knockoff::ValidationError("cannot create output directory " + dir);
}

std::string num4(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::vector<int> parse_support(const std::string& spec, int p) {
  std::vector<int> support;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    int idx = 0;
    try {
      idx = std::stoi(tok);
    } catch (const std::exception&) {
      throw knockoff::ValidationError("bad support index: " + tok);
    }
    if (idx < 1 || idx > p)
      throw knockoff::ValidationError("index out of range: " + tok);
    support.push_back(idx - 1);
  }
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  return support;
}

// ---------------------------------------------------------------- knockoffs

struct KnockoffsArgs {
  CommonInput in;
  std::uint64_t seed = 1;
  double slack = 0.999;
  std::string out;
};

int cmd_knockoffs(const KnockoffsArgs& args) {
  ensure_dir(args.out);
  const knockoff::Dataset d = load_standardized(args.in);
  const knockoff::KnockoffModel model =
      knockoff::build_knockoff_model(d, args.slack);
  const knockoff::KnockoffCopy copy =
      knockoff::sample_knockoffs(d, model, args.seed);

  std::vector<std::string> names;
  names.reserve(d.column_names.size());
  for (const auto& name : d.column_names) names.push_back(name + "_knockoff");
  knockoff::write_matrix_csv(copy.x_tilde, names,
                             (fs::path(args.out) / "xtilde.csv").string());
  knockoff::write_json(knockoff::knockoff_model_json(model, copy),
                       (fs::path(args.out) / "model.json").string());

  std::cout << "knockoffs: n=" << d.n() << " p=" << d.p()
            << " shrinkage=" << model.shrinkage
            << " lambda_min(V)=" << model.lambda_min_v << "\n"
            << "wrote " << args.out << "/xtilde.csv and " << args.out
            << "/model.json\n";
  return 0;
}

// ------------------------------------------------------------------- select

struct SelectArgs {
  CommonInput in;
  knockoff::PipelineConfig cfg;
  std::string variant = "knockoff+";
  std::string statistic = "lcd-cv";
  std::string baseline;  // lasso-cv | full | empty
  std::uint64_t seed = 1;
  int threads = 0;
  bool pred_error = false;
  int pred_folds = 10;
  std::string out;
};

json baseline_block(const SelectArgs& args, const knockoff::Dataset& d,
                    const knockoff::PipelineConfig& cfg) {
  knockoff::Selector selector;
  std::string label;
  std::vector<int> full_support;
  if (args.baseline == "lasso-cv") {
    selector = knockoff::lasso_cv_selector(cfg);
    label = "LASSO";
    full_support = knockoff::lasso_cv_support(d, cfg, args.seed);
  } else if (args.baseline == "full") {
    selector = knockoff::full_selector();
    label = "Full";
    full_support = selector(d, args.seed);
  } else if (args.baseline == "empty") {
    selector = knockoff::empty_selector();
    label = "Empty";
  } else {
    throw knockoff::ValidationError("unknown baseline: " + args.baseline);
  }

  json j;
  j["method"] = label;
  j["support"] = [&] {
    json arr = json::array();
    for (int v : full_support) arr.push_back(v + 1);
    return arr;
  }();
  if (args.pred_error) {
    const knockoff::FoldAssignment folds = knockoff::make_folds(
        static_cast<int>(d.n()), args.pred_folds, d.y,
        knockoff::mix_seed(args.seed, 0x70726564ULL));
    knockoff::PredictionReport report = knockoff::cv_prediction_error(
        d, selector, folds, args.seed, label);
    report.model_size = static_cast<int>(full_support.size());
    j["prediction"] = knockoff::prediction_json(report);
  }
  return j;
}

int cmd_select(const SelectArgs& args_in) {
  SelectArgs args = args_in;
  args.cfg.variant = knockoff::variant_from_string(args.variant);
  args.cfg.statistic = knockoff::statistic_from_string(args.statistic);
  args.cfg.threads = args.threads;
  ensure_dir(args.out);
  const knockoff::Dataset d = load_standardized(args.in);

  if (!args.baseline.empty()) {
    const json j = baseline_block(args, d, args.cfg);
    knockoff::write_json(j, (fs::path(args.out) / "selection.json").string());
    std::cout << "baseline " << j["method"].get<std::string>() << ": "
              << j["support"].size() << " variables\n";
    if (j.contains("prediction"))
      std::cout << "pred_error="
                << j["prediction"]["pred_error"].get<double>() << "\n";
    return 0;
  }

  const knockoff::PipelineResult result =
      knockoff::select_knockoff(d, args.cfg, args.seed);
  json j = knockoff::selection_json(result, d.column_names, args.cfg.statistic);
  j["method"] = knockoff::method_label(args.cfg);
  j["seed"] = args.seed;

  if (args.pred_error) {
    const knockoff::FoldAssignment folds = knockoff::make_folds(
        static_cast<int>(d.n()), args.pred_folds, d.y,
        knockoff::mix_seed(args.seed, 0x70726564ULL));
    knockoff::PredictionReport report = knockoff::cv_prediction_error(
        d, knockoff::knockoff_selector(args.cfg), folds, args.seed,
        knockoff::method_label(args.cfg));
    // model size of the selection reported above (same full-data seed)
    report.model_size = static_cast<int>(result.selection.selected.size());
    j["prediction"] = knockoff::prediction_json(report);
  }
  knockoff::write_json(j, (fs::path(args.out) / "selection.json").string());

  // human-readable summary
  std::cout << "method: " << knockoff::method_label(args.cfg) << " ("
            << knockoff::to_string(args.cfg.variant) << "), q=" << args.cfg.q
            << ", k=" << args.cfg.k << "\n";
  for (size_t i = 0; i < result.runs.size(); ++i) {
    const auto& run = result.runs[i];
    std::cout << "run " << i + 1 << ": q_i=" << num4(run.record.q)
              << " threshold=" << num4(run.record.threshold);
    if (std::isfinite(run.r_star)) std::cout << " r*=" << num4(run.r_star);
    std::cout << " selected=" << run.record.selected.size() << "\n";
  }
  const auto& sel = result.selection.selected;
  if (sel.empty()) {
    std::cout << "0 variables selected";
    if (result.selection.runs.size() == 1)
      std::cout << " (threshold = +inf)";
    std::cout << "\n";
  } else {
    std::cout << sel.size() << " variables selected:\n";
    std::printf("%-6s %-24s", "index", "name");
    for (size_t r = 0; r < result.runs.size(); ++r)
      std::printf(" %12s", ("W(run" + std::to_string(r + 1) + ")").c_str());
    std::printf("\n");
    for (int idx : sel) {
      std::printf("%-6d %-24s", idx + 1,
                  d.column_names[static_cast<size_t>(idx)].c_str());
      for (const auto& run : result.runs)
        std::printf(" %12s", num4(run.w.w[idx]).c_str());
      std::printf("\n");
    }
  }
  if (args.pred_error)
    std::cout << "pred_error=" << j["prediction"]["pred_error"].get<double>()
              << " (" << args.pred_folds << "-fold, model size "
              << j["prediction"]["model_size"].get<int>() << ")\n";
  return 0;
}

// -------------------------------------------------------------------- refit

struct RefitArgs {
  CommonInput in;
  std::string support_spec;
  std::string selection_path;
  std::string kind = "both";
  std::string scale = "standardized";
  std::string out;
};

knockoff::CoefficientScale scale_from_string(const std::string& s) {
  if (s == "standardized") return knockoff::CoefficientScale::standardized_all;
  if (s == "continuous-only")
    return knockoff::CoefficientScale::standardized_continuous_only;
  if (s == "raw") return knockoff::CoefficientScale::raw;
  throw knockoff::ValidationError("unknown scale: " + s);
}

void print_refit_table(const knockoff::Dataset& d,
                       const std::vector<int>& support,
                       const std::vector<const knockoff::RefitEstimates*>& fits,
                       const std::vector<std::string>& headers,
                       const knockoff::MarginalEffects* me) {
  std::printf("%-28s", "term");
  for (const auto& h : headers) std::printf(" %18s", h.c_str());
  if (me != nullptr) std::printf(" %18s", "marg.eff (std)");
  std::printf("\n");

  const size_t rows = support.size() + 1;
  for (size_t i = 0; i < rows; ++i) {
    const std::string term =
        i == 0 ? "(intercept)"
               : d.column_names[static_cast<size_t>(support[i - 1])];
    std::printf("%-28s", term.c_str());
    for (const auto* fit : fits) {
      const std::string cell = num4(fit->coef[static_cast<Eigen::Index>(i)]) +
                               knockoff::significance_stars(
                                   fit->p_values[static_cast<Eigen::Index>(i)]);
      std::printf(" %18s", cell.c_str());
    }
    if (me != nullptr) {
      if (i == 0) {
        std::printf(" %18s", "");
      } else {
        // marginal effects reuse the logistic p-values' stars
        const std::string cell =
            num4(me->ame[static_cast<Eigen::Index>(i - 1)]) +
            knockoff::significance_stars(
                fits.back()->p_values[static_cast<Eigen::Index>(i)]);
        std::printf(" %18s", cell.c_str());
      }
    }
    std::printf("\n%-28s", "");
    for (const auto* fit : fits) {
      const double se = fit->se[static_cast<Eigen::Index>(i)];
      const std::string cell =
          std::isfinite(se) ? "(" + num4(se) + ")" : "";
      std::printf(" %18s", cell.c_str());
    }
    if (me != nullptr) {
      if (i == 0) {
        std::printf(" %18s", "");
      } else {
        std::printf(
            " %18s",
            ("(" + num4(me->se[static_cast<Eigen::Index>(i - 1)]) + ")").c_str());
      }
    }
    std::printf("\n");
  }
  std::printf("*, **, *** significant at the 10%%, 5%% and 1%% levels\n");
}

void write_refit_csv(const std::vector<std::pair<std::string,
                                                 const knockoff::RefitEstimates*>>& fits,
                     const knockoff::Dataset& d,
                     const knockoff::MarginalEffects* me,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw knockoff::ValidationError("cannot write " + path);
  out << "model,term,estimate,se,p_value,stars\n";
  for (const auto& [label, fit] : fits) {
    for (Eigen::Index i = 0; i < fit->coef.size(); ++i) {
      const std::string term =
          i == 0 ? "(intercept)"
                 : d.column_names[static_cast<size_t>(
                       fit->support[static_cast<size_t>(i - 1)])];
      out << label << ',' << knockoff::csv_quote(term) << ','
          << knockoff::format_double(fit->coef[i]) << ','
          << knockoff::format_double(fit->se[i]) << ','
          << knockoff::format_double(fit->p_values[i]) << ','
          << knockoff::significance_stars(fit->p_values[i]) << '\n';
    }
    if (me != nullptr && fit->kind == knockoff::RefitKind::logistic) {
      for (Eigen::Index i = 0; i < me->ame.size(); ++i) {
        const std::string term = d.column_names[static_cast<size_t>(
            fit->support[static_cast<size_t>(i)])];
        out << "marginal_effect," << knockoff::csv_quote(term) << ','
            << knockoff::format_double(me->ame[i]) << ','
            << knockoff::format_double(me->se[i]) << ",,\n";
      }
    }
  }
}

int cmd_refit(const RefitArgs& args) {
  if (args.kind != "both" && args.kind != "logistic" && args.kind != "ols")
    throw knockoff::ValidationError("unknown kind: " + args.kind);
  ensure_dir(args.out);
  const knockoff::Dataset d = load_standardized(args.in);

  std::vector<int> support;
  if (!args.selection_path.empty()) {
    std::ifstream in(args.selection_path);
    if (!in)
      throw knockoff::ValidationError("missing selection file: " +
                                      args.selection_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw knockoff::ValidationError("bad selection JSON: " +
                                      std::string(e.what()));
    }
    for (const auto& entry : j.at("selected")) {
      const int idx = entry.is_object() ? entry.at("index").get<int>()
                                        : entry.get<int>();
      if (idx < 1 || idx > d.p())
        throw knockoff::ValidationError("index out of range: " +
                                        std::to_string(idx));
      support.push_back(idx - 1);
    }
    std::sort(support.begin(), support.end());
  } else {
    support = parse_support(args.support_spec, static_cast<int>(d.p()));
  }

  json out_json;
  out_json["support"] = [&] {
    json arr = json::array();
    for (int v : support) arr.push_back(v + 1);
    return arr;
  }();

  std::vector<std::pair<std::string, const knockoff::RefitEstimates*>> rows;
  std::optional<knockoff::RefitEstimates> ols_cont, ols_std, logit;
  std::optional<knockoff::MarginalEffects> me;

  if (args.kind == "both" || args.kind == "ols") {
    if (args.kind == "both") {
      ols_cont = knockoff::refit_ols(
          d, support, knockoff::CoefficientScale::standardized_continuous_only);
      ols_std = knockoff::refit_ols(
          d, support, knockoff::CoefficientScale::standardized_all);
    } else {
      ols_std = knockoff::refit_ols(d, support, scale_from_string(args.scale));
    }
  }
  if (args.kind == "both" || args.kind == "logistic") {
    logit = knockoff::refit_logistic(d, support);
    if (!support.empty()) me = knockoff::marginal_effects(*logit, d);
  }

  json models = json::array();
  std::vector<const knockoff::RefitEstimates*> table_fits;
  std::vector<std::string> headers;
  if (ols_cont) {
    models.push_back(knockoff::refit_json(*ols_cont, d.column_names));
    rows.push_back({"ols_continuous_only", &*ols_cont});
    table_fits.push_back(&*ols_cont);
    headers.push_back("OLS (cont-std)");
  }
  if (ols_std) {
    models.push_back(knockoff::refit_json(*ols_std, d.column_names));
    rows.push_back({"ols", &*ols_std});
    table_fits.push_back(&*ols_std);
    headers.push_back("OLS");
  }
  if (logit) {
    knockoff::RefitEstimates with_me = *logit;
    if (me) {
      with_me.marginal_effects = me->ame;
      with_me.marginal_effect_se = me->se;
    }
    models.push_back(knockoff::refit_json(with_me, d.column_names));
    rows.push_back({"logistic", &*logit});
    table_fits.push_back(&*logit);
    headers.push_back("Logistic");
  }
  out_json["models"] = models;
  knockoff::write_json(out_json, (fs::path(args.out) / "refit.json").string());
  write_refit_csv(rows, d, me ? &*me : nullptr,
                  (fs::path(args.out) / "refit.csv").string());
  print_refit_table(d, support, table_fits, headers, me ? &*me : nullptr);
  return 0;
}

// ----------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string scenario;
  std::string out;
  int threads = 0;
};

int cmd_simulate(const SimulateArgs& args) {
  ensure_dir(args.out);
  knockoff::Scenario sc = knockoff::load_scenario(args.scenario);
  if (args.threads > 0) sc.threads = args.threads;
  const knockoff::MonteCarloReport report = knockoff::run_monte_carlo(sc);
  knockoff::write_replicates_csv(
      report, (fs::path(args.out) / "replicates.csv").string());
  knockoff::write_summary_json(
      sc, report, (fs::path(args.out) / "summary.json").string());
  std::cout << "replicates=" << sc.replicates
            << " completed=" << report.completed
            << " failures=" << report.failures << "\n"
            << "mean_fdp=" << report.mean_fdp << " (se " << report.fdp_se
            << ") mean_power=" << report.mean_power << " (se "
            << report.power_se << ")\n";
  std::cerr << "runtime_seconds=" << report.runtime_seconds << "\n";
  return 0;
}

// ------------------------------------------------------------------- report

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
};

int cmd_report(const ReportArgs& args) {
  struct Row {
    std::string method;
    int model_size;
    double pred_error;
  };
  std::vector<Row> rows;
  for (const auto& path : args.inputs) {
    std::ifstream in(path);
    if (!in) throw knockoff::ValidationError("missing file: " + path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw knockoff::ValidationError("bad JSON in " + path + ": " + e.what());
    }
    if (!j.contains("prediction"))
      throw knockoff::ValidationError(
          path + " has no prediction block (run select with --pred-error)");
    rows.push_back({j["prediction"]["method"].get<std::string>(),
                    j["prediction"]["model_size"].get<int>(),
                    j["prediction"]["pred_error"].get<double>()});
  }

  std::printf("%-24s %12s %14s\n", "Method", "Model size", "Pred. error");
  for (const auto& row : rows)
    std::printf("%-24s %12d %14s\n", row.method.c_str(), row.model_size,
                num4(row.pred_error).c_str());

  if (!args.out.empty()) {
    std::ofstream out(args.out);
    if (!out) throw knockoff::ValidationError("cannot write " + args.out);
    out << "method,model_size,pred_error\n";
    for (const auto& row : rows)
      out << knockoff::csv_quote(row.method) << ',' << row.model_size << ','
          << knockoff::format_double(row.pred_error) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable selection with FDR control via model-X knockoffs"};
  app.require_subcommand(1);

  KnockoffsArgs ka;
  CLI::App* knockoffs = app.add_subcommand(
      "knockoffs", "Sample Gaussian knockoff copies of a dataset");
  knockoffs->add_option("--input", ka.in.input, "input CSV")->required();
  knockoffs->add_option("--response", ka.in.response, "response column name")
      ->required();
  knockoffs->add_option("--seed", ka.seed, "RNG seed");
  knockoffs->add_option("--slack", ka.slack, "equicorrelated slack in (0,1]");
  knockoffs->add_option("--out", ka.out, "output directory")->required();

  SelectArgs sa;
  CLI::App* select = app.add_subcommand(
      "select", "Select variables with FDR/AFDR control");
  select->add_option("--input", sa.in.input, "input CSV")->required();
  select->add_option("--response", sa.in.response, "response column name")
      ->required();
  select->add_option("--q", sa.cfg.q, "target FDR level");
  select->add_option("--k", sa.cfg.k, "number of aggregated knockoff runs");
  select->add_option("--variant", sa.variant, "knockoff | knockoff+");
  select->add_option("--statistic", sa.statistic, "lsm | lcd-cv");
  select->add_option("--grid-size", sa.cfg.grid_size, "penalty grid size");
  select->add_option("--min-ratio", sa.cfg.min_ratio, "grid minimum ratio");
  select->add_option("--folds", sa.cfg.cv_folds, "CV folds for lcd-cv");
  select->add_option("--slack", sa.cfg.slack, "equicorrelated slack");
  select->add_option("--seed", sa.seed, "RNG seed");
  select->add_option("--threads", sa.threads, "worker threads (0 = auto)");
  select->add_flag("--pred-error", sa.pred_error,
                   "also compute the 10-fold CV-with-refit prediction error");
  select->add_option("--pred-folds", sa.pred_folds,
                     "folds for the prediction error");
  select->add_option("--baseline", sa.baseline,
                     "evaluate a baseline instead: lasso-cv | full | empty");
  select->add_option("--out", sa.out, "output directory")->required();

  RefitArgs ra;
  CLI::App* refit = app.add_subcommand(
      "refit", "Unpenalized refits and marginal effects on a support");
  refit->add_option("--input", ra.in.input, "input CSV")->required();
  refit->add_option("--response", ra.in.response, "response column name")
      ->required();
  auto* support_opt = refit->add_option(
      "--support", ra.support_spec, "1-based comma-separated column indices");
  refit->add_option("--selection", ra.selection_path,
                    "selection.json from the select command")
      ->excludes(support_opt);
  refit->add_option("--kind", ra.kind, "both | logistic | ols");
  refit->add_option("--scale", ra.scale,
                    "ols-only scale: standardized | continuous-only | raw");
  refit->add_option("--out", ra.out, "output directory")->required();

  SimulateArgs ma;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Monte Carlo FDR/power study on synthetic ground truths");
  simulate->add_option("--scenario", ma.scenario, "scenario file")->required();
  simulate->add_option("--threads", ma.threads, "worker threads (0 = auto)");
  simulate->add_option("--out", ma.out, "output directory")->required();

  ReportArgs pa;
  CLI::App* report = app.add_subcommand(
      "report", "Render a prediction-performance table from stored results");
  report->add_option("--inputs", pa.inputs, "selection.json files")
      ->required()
      ->expected(-1);
  report->add_option("--out", pa.out, "optional CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return e.get_name() == "CallForHelp" ? code : 2;
  }

  try {
    if (*knockoffs) return cmd_knockoffs(ka);
    if (*select) return cmd_select(sa);
    if (*refit) return cmd_refit(ra);
    if (*simulate) return cmd_simulate(ma);
    if (*report) return cmd_report(pa);
  } catch (const knockoff::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const knockoff::ComputationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
