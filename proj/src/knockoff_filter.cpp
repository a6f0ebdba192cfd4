#include "knockoff/knockoff_filter.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "knockoff/errors.hpp"

namespace knockoff {

std::string to_string(Statistic s) {
  return s == Statistic::lsm ? "lsm" : "lcd-cv";
}

std::string to_string(Variant v) {
  return v == Variant::knockoff ? "knockoff" : "knockoff+";
}

Statistic statistic_from_string(const std::string& s) {
  if (s == "lsm") return Statistic::lsm;
  if (s == "lcd-cv" || s == "lcd_cv" || s == "lcd") return Statistic::lcd_cv;
  throw ValidationError("unknown statistic: " + s);
}

Variant variant_from_string(const std::string& s) {
  if (s == "knockoff") return Variant::knockoff;
  if (s == "knockoff+" || s == "knockoff-plus" || s == "plus")
    return Variant::knockoff_plus;
  throw ValidationError("unknown variant: " + s);
}

WStatistics lsm_statistics(const LassoPath& path) {
  const Eigen::Index cols = path.entry_level.size();
  if (cols < 2 || cols % 2 != 0)
    throw ValidationError("LSM statistics need a path over an augmented "
                          "matrix with an even column count");
  const Eigen::Index p = cols / 2;
  WStatistics ws;
  ws.kind = Statistic::lsm;
  ws.z = path.entry_level.head(p);
  ws.z_tilde = path.entry_level.tail(p);
  ws.w.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double zj = ws.z[j], zt = ws.z_tilde[j];
    const double sign = zj > zt ? 1.0 : (zj < zt ? -1.0 : 0.0);
    ws.w[j] = std::max(zj, zt) * sign;
  }
  return ws;
}

WStatistics lcd_statistics(const LassoFit& fit) {
  if (!fit.converged)
    throw ValidationError("LCD statistics need a converged fit");
  const Eigen::Index cols = fit.beta.size();
  if (cols < 2 || cols % 2 != 0)
    throw ValidationError("LCD statistics need a fit over an augmented "
                          "matrix with an even column count");
  const Eigen::Index p = cols / 2;
  WStatistics ws;
  ws.kind = Statistic::lcd_cv;
  ws.z = fit.beta.head(p).cwiseAbs();
  ws.z_tilde = fit.beta.tail(p).cwiseAbs();
  ws.w = ws.z - ws.z_tilde;
  return ws;
}

SelectionResult threshold(const WStatistics& w, double q, Variant variant) {
  if (q < 0.0 || q > 1.0) throw ValidationError("q must lie in [0, 1]");
  const Eigen::Index p = w.w.size();

  std::vector<double> positive, negative, candidates;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double wj = w.w[j];
    if (!std::isfinite(wj)) throw ValidationError("non-finite W statistic");
    if (wj > 0.0) positive.push_back(wj);
    if (wj < 0.0) negative.push_back(-wj);
    if (wj != 0.0) candidates.push_back(std::abs(wj));
  }
  std::sort(positive.begin(), positive.end());
  std::sort(negative.begin(), negative.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  SelectionResult result;
  result.q = q;
  result.p = static_cast<int>(p);
  result.variant = variant;
  result.threshold = std::numeric_limits<double>::infinity();

  for (const double t : candidates) {
    const auto ge = [t](const std::vector<double>& v) {
      return v.end() - std::lower_bound(v.begin(), v.end(), t);
    };
    const long num = ge(negative);  // #{j : w_j <= -t}
    const long den = ge(positive);  // #{j : w_j >= t}
    // ratio tests as num <= q * den to avoid division
    const bool ok = variant == Variant::knockoff
                        ? (den > 0 && static_cast<double>(num) <=
                                          q * static_cast<double>(den))
                        : (static_cast<double>(1 + num) <=
                           q * static_cast<double>(std::max(den, 1L)));
    if (ok) {
      result.threshold = t;
      break;
    }
  }

  if (std::isfinite(result.threshold)) {
    for (Eigen::Index j = 0; j < p; ++j)
      if (w.w[j] >= result.threshold)
        result.selected.push_back(static_cast<int>(j));
  }

  RunRecord run;
  run.q = q;
  run.threshold = result.threshold;
  run.selected = result.selected;
  result.runs.push_back(std::move(run));
  return result;
}

SelectionResult aggregate_afdr(const std::vector<SelectionResult>& runs) {
  if (runs.empty()) throw ValidationError("aggregation needs at least one run");
  for (const auto& r : runs) {
    if (r.p != runs.front().p)
      throw ValidationError("aggregation runs disagree on p");
    if (r.variant != runs.front().variant)
      throw ValidationError("aggregation runs disagree on the variant");
  }
  if (runs.size() == 1) return runs.front();

  SelectionResult out;
  out.p = runs.front().p;
  out.variant = runs.front().variant;
  out.threshold = std::numeric_limits<double>::quiet_NaN();

  std::set<int> united;
  double q_total = 0.0;
  for (const auto& r : runs) {
    q_total += r.q;
    united.insert(r.selected.begin(), r.selected.end());
    RunRecord rec;
    rec.q = r.q;
    rec.threshold = r.threshold;
    rec.selected = r.selected;
    if (!r.runs.empty()) rec.seed = r.runs.front().seed;
    out.runs.push_back(std::move(rec));
  }
  out.q = q_total;
  out.selected.assign(united.begin(), united.end());
  return out;
}

}  // namespace knockoff
