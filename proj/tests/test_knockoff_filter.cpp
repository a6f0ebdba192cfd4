#include "doctest.h"

#include <cmath>
#include <set>

#include "knockoff/errors.hpp"
#include "knockoff/knockoff_filter.hpp"
#include "knockoff/rng.hpp"
#include "oracles.hpp"

using namespace knockoff;

namespace {

// mixed discrete/continuous W generator with deliberate ties and zeros
Eigen::VectorXd random_w(SequentialRng& rng, int max_p = 12) {
  const int p = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_p)));
  Eigen::VectorXd w(p);
  for (int j = 0; j < p; ++j) {
    const std::uint64_t kind = rng.next_below(4);
    if (kind == 0) {
      w[j] = 0.0;
    } else if (kind == 1) {
      // small integers force ties across coordinates
      w[j] = static_cast<double>(1 + rng.next_below(4));
      if (rng.next_bits() & 1) w[j] = -w[j];
    } else {
      w[j] = 3.0 * (rng.next_uniform() - 0.5);
    }
  }
  return w;
}

LassoPath fake_path(const Eigen::VectorXd& entry) {
  LassoPath path;
  path.entry_level = entry;
  return path;
}

WStatistics lcd_from(const Eigen::VectorXd& beta) {
  LassoFit fit;
  fit.beta = beta;
  fit.converged = true;
  return lcd_statistics(fit);
}

}  // namespace

TEST_CASE("LSM statistic formula") {
  Eigen::VectorXd entry(6);
  entry << 0.7, 0.4, 0.2, 0.3, 0.4, 0.5;  // z = (0.7, 0.4, 0.2), z~ = (0.3, 0.4, 0.5)
  const WStatistics ws = lsm_statistics(fake_path(entry));
  CHECK(ws.w[0] == doctest::Approx(0.7));
  CHECK(ws.w[1] == 0.0);  // tie gives sign 0
  CHECK(ws.w[2] == doctest::Approx(-0.5));
  CHECK(ws.kind == Statistic::lsm);
}

TEST_CASE("LSM rejects odd dimensions") {
  Eigen::VectorXd entry(3);
  entry << 1, 2, 3;
  CHECK_THROWS_AS(lsm_statistics(fake_path(entry)), ValidationError);
}

TEST_CASE("LCD statistic formula and antisymmetry") {
  Eigen::VectorXd beta(6);
  beta << 0.5, 0.0, -0.2, 0.1, 0.3, 0.0;
  const WStatistics ws = lcd_from(beta);
  CHECK(ws.w[0] == doctest::Approx(0.4));
  CHECK(ws.w[1] == doctest::Approx(-0.3));
  CHECK(ws.w[2] == doctest::Approx(0.2));

  SUBCASE("all-zero fit gives the zero vector") {
    const WStatistics zero = lcd_from(Eigen::VectorXd::Zero(6));
    CHECK(zero.w.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("swapping original and knockoff blocks negates w") {
    Eigen::VectorXd swapped(6);
    swapped << 0.1, 0.3, 0.0, 0.5, 0.0, -0.2;
    const WStatistics neg = lcd_from(swapped);
    CHECK((ws.w + neg.w).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("non-converged fit rejected") {
    LassoFit fit;
    fit.beta = beta;
    fit.converged = false;
    CHECK_THROWS_AS(lcd_statistics(fit), ValidationError);
  }
}

TEST_CASE("threshold on the worked example") {
  WStatistics ws;
  ws.w.resize(4);
  ws.w << 3, 2, -1, 5;
  SUBCASE("knockoff: T = 1") {
    const SelectionResult r = threshold(ws, 0.5, Variant::knockoff);
    CHECK(r.threshold == doctest::Approx(1.0));
    CHECK(r.selected == std::vector<int>{0, 1, 3});
  }
  SUBCASE("knockoff+: T = 2") {
    const SelectionResult r = threshold(ws, 0.5, Variant::knockoff_plus);
    CHECK(r.threshold == doctest::Approx(2.0));
    CHECK(r.selected == std::vector<int>{0, 1, 3});
  }
}

TEST_CASE("all-negative W selects nothing") {
  WStatistics ws;
  ws.w.resize(3);
  ws.w << -1, -2, -0.5;
  const SelectionResult r = threshold(ws, 1.0, Variant::knockoff_plus);
  CHECK(r.selected.empty());
  CHECK(std::isinf(r.threshold));
}

TEST_CASE("threshold matches the naive oracle scan") {
  SequentialRng rng(2024);
  const double qs[] = {0.05, 0.1, 0.2, 0.5};
  for (int rep = 0; rep < 300; ++rep) {
    const Eigen::VectorXd w = random_w(rng);
    WStatistics ws;
    ws.w = w;
    for (double q : qs) {
      for (Variant v : {Variant::knockoff, Variant::knockoff_plus}) {
        const SelectionResult got = threshold(ws, q, v);
        const oracle::ThresholdScan ref = oracle::naive_threshold(w, q, v);
        CHECK(got.threshold == ref.threshold);
        CHECK(got.selected == ref.selected);
      }
    }
  }
}

TEST_CASE("selection is monotone in q and scale invariant") {
  SequentialRng rng(555);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::VectorXd w = random_w(rng);
    WStatistics ws;
    ws.w = w;
    for (Variant v : {Variant::knockoff, Variant::knockoff_plus}) {
      const auto s1 = threshold(ws, 0.1, v);
      const auto s2 = threshold(ws, 0.3, v);
      const std::set<int> small(s1.selected.begin(), s1.selected.end());
      for (int j : s1.selected) CHECK(small.count(j) == 1);
      const std::set<int> big(s2.selected.begin(), s2.selected.end());
      for (int j : s1.selected) CHECK(big.count(j) == 1);

      WStatistics scaled;
      scaled.w = 3.7 * w;
      const auto s3 = threshold(scaled, 0.1, v);
      CHECK(s3.selected == s1.selected);
      if (std::isfinite(s1.threshold))
        CHECK(s3.threshold == doctest::Approx(3.7 * s1.threshold));
    }
  }
}

TEST_CASE("negating a positive w_j removes it from the selection") {
  SequentialRng rng(808);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::VectorXd w = random_w(rng);
    WStatistics ws;
    ws.w = w;
    const auto sel = threshold(ws, 0.4, Variant::knockoff_plus);
    for (int j : sel.selected) {
      Eigen::VectorXd flipped = w;
      flipped[j] = -flipped[j];
      const auto rerun =
          oracle::naive_threshold(flipped, 0.4, Variant::knockoff_plus);
      for (int chosen : rerun.selected) CHECK(chosen != j);
    }
  }
}

TEST_CASE("aggregation is the exact union with per-run provenance") {
  auto make_run = [](std::vector<int> sel, double q, double t) {
    SelectionResult r;
    r.selected = std::move(sel);
    r.q = q;
    r.threshold = t;
    r.p = 6;
    r.variant = Variant::knockoff_plus;
    RunRecord rec;
    rec.q = q;
    rec.threshold = t;
    rec.selected = r.selected;
    r.runs.push_back(rec);
    return r;
  };
  SUBCASE("three runs") {
    const auto agg = aggregate_afdr({make_run({0, 1}, 0.1 / 3, 1.0),
                                     make_run({1, 2}, 0.1 / 3, 2.0),
                                     make_run({}, 0.1 / 3, INFINITY)});
    CHECK(agg.selected == std::vector<int>{0, 1, 2});
    CHECK(agg.q == doctest::Approx(0.1));
    CHECK(agg.runs.size() == 3);
  }
  SUBCASE("k = 1 is the identity") {
    const auto one = make_run({2, 4}, 0.1, 0.7);
    const auto agg = aggregate_afdr({one});
    CHECK(agg.selected == one.selected);
    CHECK(agg.threshold == one.threshold);
    CHECK(agg.q == one.q);
  }
  SUBCASE("mismatched p rejected") {
    auto a = make_run({0}, 0.05, 1.0);
    auto b = make_run({1}, 0.05, 1.0);
    b.p = 7;
    CHECK_THROWS_AS(aggregate_afdr({a, b}), ValidationError);
  }
  SUBCASE("mismatched variant rejected") {
    auto a = make_run({0}, 0.05, 1.0);
    auto b = make_run({1}, 0.05, 1.0);
    b.variant = Variant::knockoff;
    CHECK_THROWS_AS(aggregate_afdr({a, b}), ValidationError);
  }
  SUBCASE("union is a superset of every constituent") {
    SequentialRng rng(31);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<SelectionResult> runs;
      std::set<int> expect;
      for (int i = 0; i < 3; ++i) {
        std::vector<int> sel;
        for (int j = 0; j < 6; ++j)
          if (rng.next_bits() & 1) sel.push_back(j);
        expect.insert(sel.begin(), sel.end());
        runs.push_back(make_run(sel, 0.1, 1.0));
      }
      const auto agg = aggregate_afdr(runs);
      CHECK(agg.selected == std::vector<int>(expect.begin(), expect.end()));
      for (const auto& run : runs)
        for (int j : run.selected)
          CHECK(std::binary_search(agg.selected.begin(), agg.selected.end(), j));
    }
  }
}
