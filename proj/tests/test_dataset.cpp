#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <set>

#include "knockoff/dataset.hpp"
#include "knockoff/errors.hpp"
#include "knockoff/rng.hpp"

using namespace knockoff;

namespace {

std::string write_temp_csv(const std::string& name, const std::string& body) {
  const std::string path = "/tmp/knockoff_test_" + name + ".csv";
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("load_csv parses a simple file") {
  const auto path = write_temp_csv("basic", "a,b,y\n1,2,0\n3,4,1\n");
  const Dataset d = load_csv(path, "y");
  CHECK(d.n() == 2);
  CHECK(d.p() == 2);
  CHECK(d.y[0] == 0.0);
  CHECK(d.y[1] == 1.0);
  CHECK(d.column_names == std::vector<std::string>{"a", "b"});
  CHECK(d.x(0, 0) == 1.0);
  CHECK(d.x(1, 1) == 4.0);
  CHECK_FALSE(d.standardized);
  std::remove(path.c_str());
}

TEST_CASE("load_csv rejects a non-binary response") {
  const auto path = write_temp_csv("nonbinary", "a,y\n1,0\n2,2\n");
  CHECK_THROWS_WITH_AS(load_csv(path, "y"),
                       doctest::Contains("non-binary response"),
                       ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("load_csv rejects a constant column") {
  const auto path = write_temp_csv("constant", "a,b,y\n5,1,0\n5,2,1\n5,3,0\n");
  CHECK_THROWS_WITH_AS(load_csv(path, "y"),
                       doctest::Contains("constant column a"), ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("load_csv reports missing file and bad cells") {
  CHECK_THROWS_AS(load_csv("/tmp/definitely_not_there.csv", "y"),
                  ValidationError);
  const auto path = write_temp_csv("badcell", "a,y\n1,0\nxyz,1\n");
  CHECK_THROWS_WITH_AS(load_csv(path, "y"),
                       doctest::Contains("row 3, column a"), ValidationError);
  std::remove(path.c_str());
  const auto path2 = write_temp_csv("nomresp", "a,b\n1,2\n3,4\n");
  CHECK_THROWS_WITH_AS(load_csv(path2, "y"),
                       doctest::Contains("missing response column"),
                       ValidationError);
  std::remove(path2.c_str());
}

TEST_CASE("standardize centers and rescales to sum of squares n") {
  Eigen::MatrixXd x(4, 2);
  x.col(0) << 1, -1, 1, -1;  // already standardized
  x.col(1) << 3, 7, 1, 5;
  Eigen::VectorXd y(4);
  y << 0, 1, 0, 1;
  const Dataset d = standardize(make_dataset(x, y, {"u", "v"}));
  CHECK(d.standardized);
  CHECK(d.x.col(0).isApprox(x.col(0), 1e-14));
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(d.x.col(j).mean()) < 1e-12);
    CHECK(d.x.col(j).squaredNorm() == doctest::Approx(4.0).epsilon(1e-10));
  }
}

TEST_CASE("standardize maps (0,2) to (-1,1)") {
  Eigen::MatrixXd x(2, 1);
  x << 0, 2;
  Eigen::VectorXd y(2);
  y << 0, 1;
  const Dataset d = standardize(make_dataset(x, y, {"a"}));
  CHECK(d.x(0, 0) == doctest::Approx(-1.0));
  CHECK(d.x(1, 0) == doctest::Approx(1.0));
  CHECK(d.column_means[0] == doctest::Approx(1.0));
  CHECK(d.column_scales[0] == doctest::Approx(1.0));
}

TEST_CASE("standardize rejects a zero-variance column") {
  Eigen::MatrixXd x(3, 1);
  x << 0, 0, 0;
  Eigen::VectorXd y(3);
  y << 0, 1, 0;
  CHECK_THROWS_AS(standardize(make_dataset(x, y, {"a"})), ValidationError);
}

TEST_CASE("standardization is invertible through the recorded affine map") {
  SequentialRng rng(42);
  Eigen::MatrixXd x(30, 4);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 4; ++j)
      x(i, j) = 10.0 * rng.next_normal() + static_cast<double>(j);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) y[i] = i % 2;
  const Dataset raw = make_dataset(x, y, {"a", "b", "c", "d"});
  const Dataset std_d = standardize(raw);
  for (int j = 0; j < 4; ++j) {
    CHECK((std_d.raw_column(j) - x.col(j)).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("make_folds splits evenly") {
  SUBCASE("n=10 K=10: singleton folds") {
    const FoldAssignment f = make_folds(10, 10, std::nullopt, 7);
    std::vector<int> sizes(10, 0);
    for (int v : f.fold_of) ++sizes[static_cast<size_t>(v - 1)];
    for (int s : sizes) CHECK(s == 1);
  }
  SUBCASE("n=10 K=3: sizes {4,3,3}") {
    const FoldAssignment f = make_folds(10, 3, std::nullopt, 7);
    std::multiset<int> sizes;
    std::vector<int> count(3, 0);
    for (int v : f.fold_of) ++count[static_cast<size_t>(v - 1)];
    sizes.insert(count.begin(), count.end());
    CHECK(sizes == std::multiset<int>{3, 3, 4});
  }
  SUBCASE("K > n rejected") {
    CHECK_THROWS_AS(make_folds(5, 6, std::nullopt, 1), ValidationError);
  }
}

TEST_CASE("stratified folds spread positives exactly") {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(100);
  for (int i = 0; i < 10; ++i) y[i * 10] = 1.0;
  const FoldAssignment f = make_folds(100, 10, y, 123);
  std::vector<int> pos(10, 0), tot(10, 0);
  for (int i = 0; i < 100; ++i) {
    ++tot[static_cast<size_t>(f.fold_of[static_cast<size_t>(i)] - 1)];
    if (y[i] == 1.0)
      ++pos[static_cast<size_t>(f.fold_of[static_cast<size_t>(i)] - 1)];
  }
  for (int k = 0; k < 10; ++k) {
    CHECK(tot[static_cast<size_t>(k)] == 10);
    CHECK(pos[static_cast<size_t>(k)] == 1);
  }
}

TEST_CASE("make_folds is deterministic and covers all rows") {
  const FoldAssignment a = make_folds(37, 5, std::nullopt, 99);
  const FoldAssignment b = make_folds(37, 5, std::nullopt, 99);
  CHECK(a.fold_of == b.fold_of);
  const FoldAssignment c = make_folds(37, 5, std::nullopt, 100);
  std::set<int> folds_seen(c.fold_of.begin(), c.fold_of.end());
  CHECK(folds_seen == std::set<int>{1, 2, 3, 4, 5});
  int covered = 0;
  for (int k = 1; k <= 5; ++k)
    covered += static_cast<int>(fold_validation_rows(c, k).size());
  CHECK(covered == 37);
}

TEST_CASE("dataset checksum changes with the data") {
  Eigen::MatrixXd x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd y(3);
  y << 0, 1, 0;
  const Dataset a = make_dataset(x, y, {"a", "b"});
  x(0, 0) = 1.5;
  const Dataset b = make_dataset(x, y, {"a", "b"});
  CHECK(dataset_checksum(a) != dataset_checksum(b));
  CHECK(dataset_checksum(a) == dataset_checksum(a));
}
