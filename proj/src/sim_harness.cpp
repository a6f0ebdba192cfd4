#include "knockoff/sim_harness.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "knockoff/errors.hpp"
#include "knockoff/io.hpp"
#include "knockoff/parallel.hpp"
#include "knockoff/rng.hpp"

namespace knockoff {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

Eigen::MatrixXd covariance_matrix(const Scenario& sc) {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(sc.p, sc.p);
  switch (sc.correlation) {
    case CovarianceKind::identity:
      break;
    case CovarianceKind::equicorrelated:
      for (int i = 0; i < sc.p; ++i)
        for (int j = 0; j < sc.p; ++j)
          if (i != j) sigma(i, j) = sc.rho;
      break;
    case CovarianceKind::ar1:
      for (int i = 0; i < sc.p; ++i)
        for (int j = 0; j < sc.p; ++j)
          sigma(i, j) = std::pow(sc.rho, std::abs(i - j));
      break;
  }
  return sigma;
}

Eigen::VectorXd draw_response(const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& beta_star,
                              std::uint64_t key) {
  const CounterRng rng(key);
  const Eigen::VectorXd eta = x * beta_star;
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    y[i] = rng.uniform(static_cast<std::uint64_t>(i)) < sigmoid(eta[i]) ? 1.0
                                                                        : 0.0;
  return y;
}

}  // namespace

CovarianceKind covariance_from_string(const std::string& s) {
  if (s == "identity") return CovarianceKind::identity;
  if (s == "equicorrelated") return CovarianceKind::equicorrelated;
  if (s == "ar1") return CovarianceKind::ar1;
  throw ValidationError("unknown correlation kind: " + s);
}

std::string to_string(CovarianceKind k) {
  switch (k) {
    case CovarianceKind::identity: return "identity";
    case CovarianceKind::equicorrelated: return "equicorrelated";
    case CovarianceKind::ar1: return "ar1";
  }
  return "identity";
}

PipelineConfig Scenario::pipeline_config() const {
  PipelineConfig cfg;
  cfg.q = q;
  cfg.k = k;
  cfg.variant = variant;
  cfg.statistic = statistic;
  cfg.grid_size = grid_size;
  cfg.min_ratio = min_ratio;
  cfg.cv_folds = folds;
  cfg.slack = slack;
  cfg.threads = 1;  // parallelism lives at the replicate level
  return cfg;
}

void validate_scenario(const Scenario& sc) {
  if (sc.n < 4) throw ValidationError("scenario n too small");
  if (sc.p < 1) throw ValidationError("scenario p must be positive");
  if (sc.s0 < 0 || sc.s0 > sc.p)
    throw ValidationError("scenario s0 must lie in [0, p]");
  if (sc.rho < 0.0 || sc.rho >= 1.0)
    throw ValidationError("scenario rho must lie in [0, 1)");
  if (sc.q < 0.0 || sc.q > 1.0) throw ValidationError("scenario q in [0, 1]");
  if (sc.k < 1) throw ValidationError("scenario k must be at least 1");
  if (sc.replicates < 1)
    throw ValidationError("scenario needs at least one replicate");
  if (sc.amplitude < 0.0)
    throw ValidationError("scenario amplitude must be nonnegative");
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing scenario file: " + path);
  Scenario sc;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("scenario line " + std::to_string(lineno) +
                            " is not key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "n") sc.n = std::stoi(value);
      else if (key == "p") sc.p = std::stoi(value);
      else if (key == "s0") sc.s0 = std::stoi(value);
      else if (key == "amplitude") sc.amplitude = std::stod(value);
      else if (key == "correlation") sc.correlation = covariance_from_string(value);
      else if (key == "rho") sc.rho = std::stod(value);
      else if (key == "q") sc.q = std::stod(value);
      else if (key == "k") sc.k = std::stoi(value);
      else if (key == "variant") sc.variant = variant_from_string(value);
      else if (key == "statistic") sc.statistic = statistic_from_string(value);
      else if (key == "replicates") sc.replicates = std::stoi(value);
      else if (key == "base_seed") sc.base_seed = std::stoull(value);
      else if (key == "grid_size") sc.grid_size = std::stoi(value);
      else if (key == "min_ratio") sc.min_ratio = std::stod(value);
      else if (key == "folds") sc.folds = std::stoi(value);
      else if (key == "slack") sc.slack = std::stod(value);
      else if (key == "threads") sc.threads = std::stoi(value);
      else throw ValidationError("unknown scenario key: " + key);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
      throw ValidationError("bad value for scenario key " + key + ": " + value);
    }
  }
  validate_scenario(sc);
  return sc;
}

SyntheticData generate_synthetic(const Scenario& sc, int replicate) {
  validate_scenario(sc);
  const std::uint64_t rep_key =
      mix_seed(sc.base_seed, static_cast<std::uint64_t>(replicate));

  const Eigen::MatrixXd sigma = covariance_matrix(sc);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw ValidationError("scenario covariance is not positive definite");
  const Eigen::MatrixXd chol_t = Eigen::MatrixXd(llt.matrixL()).transpose();

  Eigen::MatrixXd z(sc.n, sc.p);
  for (int i = 0; i < sc.n; ++i) {
    const CounterRng row_rng(
        mix_seed(mix_seed(rep_key, 0), static_cast<std::uint64_t>(i)));
    for (int j = 0; j < sc.p; ++j)
      z(i, j) = row_rng.normal(static_cast<std::uint64_t>(j));
  }
  Eigen::MatrixXd x_raw =
      sc.correlation == CovarianceKind::identity ? z : Eigen::MatrixXd(z * chol_t);

  std::vector<std::string> names;
  names.reserve(static_cast<size_t>(sc.p));
  for (int j = 0; j < sc.p; ++j) names.push_back("x" + std::to_string(j + 1));

  // support positions and signs
  SequentialRng support_rng(mix_seed(rep_key, 1));
  std::vector<int> order(static_cast<size_t>(sc.p));
  std::iota(order.begin(), order.end(), 0);
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[support_rng.next_below(i)]);
  std::vector<int> support(order.begin(), order.begin() + sc.s0);
  std::sort(support.begin(), support.end());

  Eigen::VectorXd beta_star = Eigen::VectorXd::Zero(sc.p);
  for (int j : support) {
    const double sign = (support_rng.next_bits() & 1ULL) ? 1.0 : -1.0;
    beta_star[j] = sign * sc.amplitude;
  }

  SyntheticData out;
  out.true_support = support;
  out.beta_star = beta_star;

  Dataset unstd = make_dataset(std::move(x_raw), Eigen::VectorXd::Zero(sc.n),
                               names);
  Dataset std_data = standardize(unstd);

  Eigen::VectorXd y = draw_response(std_data.x, beta_star, mix_seed(rep_key, 2));
  if (y.mean() <= 0.0 || y.mean() >= 1.0) {
    y = draw_response(std_data.x, beta_star, mix_seed(rep_key, 3));
    if (y.mean() <= 0.0 || y.mean() >= 1.0)
      throw ComputationError("degenerate response after one resample");
  }
  std_data.y = y;
  out.data = std::move(std_data);
  return out;
}

SelectionMetrics evaluate_selection(const std::vector<int>& selected,
                                    const std::vector<int>& true_support,
                                    int p) {
  const std::set<int> sel(selected.begin(), selected.end());
  const std::set<int> truth(true_support.begin(), true_support.end());
  for (int j : sel)
    if (j < 0 || j >= p) throw ValidationError("selected index out of range");
  for (int j : truth)
    if (j < 0 || j >= p) throw ValidationError("true index out of range");

  SelectionMetrics m;
  for (int j : sel) (truth.count(j) ? m.tp : m.fp)++;
  for (int j : truth)
    if (!sel.count(j)) ++m.fn;
  m.hd = m.fp + m.fn;
  m.fdp = static_cast<double>(m.fp) /
          std::max<double>(1.0, static_cast<double>(sel.size()));
  if (truth.empty()) {
    m.power = 0.0;
    m.power_defined = false;
  } else {
    m.power = static_cast<double>(m.tp) / static_cast<double>(truth.size());
  }
  return m;
}

MonteCarloReport run_monte_carlo(const Scenario& sc) {
  validate_scenario(sc);
  const auto start = std::chrono::steady_clock::now();

  MonteCarloReport report;
  report.replicates.resize(static_cast<size_t>(sc.replicates));
  const PipelineConfig cfg = sc.pipeline_config();

  parallel_for(sc.replicates, sc.threads, [&](int r) {
    ReplicateOutcome& out = report.replicates[static_cast<size_t>(r)];
    out.replicate = r;
    try {
      const SyntheticData data = generate_synthetic(sc, r);
      const std::uint64_t select_seed =
          mix_seed(mix_seed(sc.base_seed, static_cast<std::uint64_t>(r)), 4);
      const PipelineResult sel = select_knockoff(data.data, cfg, select_seed);
      out.selected_size = static_cast<int>(sel.selection.selected.size());
      out.metrics =
          evaluate_selection(sel.selection.selected, data.true_support, sc.p);
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
    }
  });

  std::vector<double> fdps, powers;
  for (const auto& rep : report.replicates) {
    if (rep.failed) {
      ++report.failures;
      continue;
    }
    ++report.completed;
    fdps.push_back(rep.metrics.fdp);
    powers.push_back(rep.metrics.power);
  }
  if (report.failures * 20 > sc.replicates)
    throw ComputationError("more than 5% of replicates failed (" +
                           std::to_string(report.failures) + "/" +
                           std::to_string(sc.replicates) + ")");

  auto mean_of = [](const std::vector<double>& v) {
    return v.empty() ? 0.0
                     : std::accumulate(v.begin(), v.end(), 0.0) /
                           static_cast<double>(v.size());
  };
  auto se_of = [&](const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return sd / std::sqrt(static_cast<double>(v.size()));
  };
  report.mean_fdp = mean_of(fdps);
  report.fdp_se = se_of(fdps, report.mean_fdp);
  report.mean_power = mean_of(powers);
  report.power_se = se_of(powers, report.mean_power);
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

void write_replicates_csv(const MonteCarloReport& report,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << "replicate,failed,selected_size,tp,fp,fn,hd,fdp,power,power_defined,error\n";
  for (const auto& rep : report.replicates) {
    out << rep.replicate << ',' << (rep.failed ? 1 : 0) << ','
        << rep.selected_size << ',' << rep.metrics.tp << ',' << rep.metrics.fp
        << ',' << rep.metrics.fn << ',' << rep.metrics.hd << ','
        << format_double(rep.metrics.fdp) << ','
        << format_double(rep.metrics.power) << ','
        << (rep.metrics.power_defined ? 1 : 0) << ',' << csv_quote(rep.error)
        << '\n';
  }
}

void write_summary_json(const Scenario& sc, const MonteCarloReport& report,
                        const std::string& path) {
  nlohmann::json j;
  j["scenario"] = {
      {"n", sc.n},
      {"p", sc.p},
      {"s0", sc.s0},
      {"amplitude", sc.amplitude},
      {"correlation", to_string(sc.correlation)},
      {"rho", sc.rho},
      {"q", sc.q},
      {"k", sc.k},
      {"variant", to_string(sc.variant)},
      {"statistic", to_string(sc.statistic)},
      {"replicates", sc.replicates},
      {"base_seed", sc.base_seed},
      {"grid_size", sc.grid_size},
      {"min_ratio", sc.min_ratio},
      {"folds", sc.folds},
      {"slack", sc.slack},
  };
  j["completed"] = report.completed;
  j["failures"] = report.failures;
  j["mean_fdp"] = report.mean_fdp;
  j["fdp_se"] = report.fdp_se;
  j["mean_power"] = report.mean_power;
  j["power_se"] = report.power_se;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace knockoff
