// End-to-end checks of the kfilter binary: exit codes, output formats,
// determinism of output files across reruns.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#ifndef KFILTER_PATH
#error "KFILTER_PATH must be defined"
#endif

namespace {

const std::string kBinary = KFILTER_PATH;
const std::string kWork = "/tmp/kfilter_cli_tests";

struct CommandResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

CommandResult run(const std::string& args) {
  const std::string out_file = kWork + "/cmd_output.txt";
  const std::string cmd = kBinary + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(out_file);
  std::stringstream buf;
  buf << in.rdbuf();
  const int code = status < 0 ? status : WEXITSTATUS(status);
  return {code, buf.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_dataset_csv(const std::string& path, int n, unsigned seed) {
  // light-weight LCG; only needs to produce a fixed non-degenerate dataset
  std::uint64_t state = seed;
  auto next = [&state] {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(state >> 11) / 9007199254740992.0;
  };
  std::ofstream out(path);
  out << "x1,x2,x3,x4,y\n";
  for (int i = 0; i < n; ++i) {
    const double x1 = 2.0 * next() - 1.0;
    const double x2 = 2.0 * next() - 1.0;
    const double x3 = 2.0 * next() - 1.0;
    const double x4 = 2.0 * next() - 1.0;
    const double eta = 3.0 * x1 - 3.0 * x2;
    const double p = 1.0 / (1.0 + std::exp(-eta));
    out << x1 << ',' << x2 << ',' << x3 << ',' << x4 << ','
        << (next() < p ? 1 : 0) << '\n';
  }
}

struct Setup {
  Setup() {
    std::system(("rm -rf " + kWork + " && mkdir -p " + kWork).c_str());
    write_dataset_csv(kWork + "/d.csv", 100, 42);
  }
};
const Setup setup_once;

}  // namespace

TEST_CASE("knockoffs command writes model and copies deterministically") {
  const std::string base = "knockoffs --input " + kWork + "/d.csv --response y --seed 7 --out ";
  REQUIRE(run(base + kWork + "/kn1").exit_code == 0);
  REQUIRE(run(base + kWork + "/kn2").exit_code == 0);
  CHECK(slurp(kWork + "/kn1/xtilde.csv") == slurp(kWork + "/kn2/xtilde.csv"));
  CHECK(slurp(kWork + "/kn1/model.json") == slurp(kWork + "/kn2/model.json"));
  const auto different =
      run("knockoffs --input " + kWork + "/d.csv --response y --seed 8 --out " +
          kWork + "/kn3");
  REQUIRE(different.exit_code == 0);
  CHECK(slurp(kWork + "/kn1/xtilde.csv") != slurp(kWork + "/kn3/xtilde.csv"));
}

TEST_CASE("select command formats and determinism") {
  const std::string args =
      "select --input " + kWork + "/d.csv --response y --statistic lsm "
      "--q 0.4 --k 2 --variant knockoff --grid-size 20 --min-ratio 1e-2 "
      "--seed 5 --out ";
  const auto a = run(args + kWork + "/sel1");
  REQUIRE(a.exit_code == 0);
  CHECK(a.output.find("AFDR LSM") != std::string::npos);
  const auto b = run(args + kWork + "/sel2");
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(kWork + "/sel1/selection.json") ==
        slurp(kWork + "/sel2/selection.json"));
}

TEST_CASE("select --k 1 reports single-run provenance as FDR") {
  const auto r = run("select --input " + kWork +
                     "/d.csv --response y --statistic lsm --q 0.4 --k 1 "
                     "--variant knockoff --grid-size 20 --min-ratio 1e-2 "
                     "--seed 5 --out " + kWork + "/sel_k1");
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("FDR LSM") != std::string::npos);
  const std::string j = slurp(kWork + "/sel_k1/selection.json");
  CHECK(j.find("\"k\": 1") != std::string::npos);
}

TEST_CASE("empty selections print the zero-selected format") {
  // pure-noise response: a fresh dataset with labels independent of x
  const std::string noise_csv = kWork + "/noise.csv";
  {
    std::ofstream out(noise_csv);
    out << "x1,x2,y\n";
    std::uint64_t state = 99;
    auto next = [&state] {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      return static_cast<double>(state >> 11) / 9007199254740992.0;
    };
    for (int i = 0; i < 60; ++i)
      out << next() << ',' << next() << ',' << (i % 2) << '\n';
  }
  const auto r = run("select --input " + noise_csv +
                     " --response y --statistic lsm --q 0.05 --k 1 "
                     "--grid-size 20 --min-ratio 1e-2 --seed 2 --out " +
                     kWork + "/sel_noise");
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("0 variables selected") != std::string::npos);
}

TEST_CASE("validation failures exit with code 2") {
  CHECK(run("select --input /tmp/no_such_file.csv --response y --out " +
            kWork + "/x").exit_code == 2);
  const auto bad_response =
      run("knockoffs --input " + kWork + "/d.csv --response x1 --seed 1 --out " +
          kWork + "/x");
  CHECK(bad_response.exit_code == 2);
  CHECK(bad_response.output.find("non-binary response") != std::string::npos);
  const auto bad_support =
      run("refit --input " + kWork + "/d.csv --response y --support 1,9 --out " +
          kWork + "/x");
  CHECK(bad_support.exit_code == 2);
  CHECK(bad_support.output.find("index out of range") != std::string::npos);
  CHECK(run("refit --input " + kWork +
            "/d.csv --response y --support 1 --kind nonsense --out " +
            kWork + "/x").exit_code == 2);
}

TEST_CASE("refit writes CSV and JSON outputs") {
  const auto r = run("refit --input " + kWork +
                     "/d.csv --response y --support 1,2 --out " + kWork + "/rf");
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("(intercept)") != std::string::npos);
  const std::string csv = slurp(kWork + "/rf/refit.csv");
  CHECK(csv.find("model,term,estimate,se,p_value,stars") != std::string::npos);
  CHECK(csv.find("marginal_effect") != std::string::npos);
  const std::string j = slurp(kWork + "/rf/refit.json");
  CHECK(j.find("\"logistic\"") != std::string::npos);
}

TEST_CASE("simulate and report round trip") {
  const std::string cfg = kWork + "/scenario.cfg";
  {
    std::ofstream out(cfg);
    out << "n = 100\np = 6\ns0 = 2\namplitude = 4\ncorrelation = identity\n"
        << "q = 0.4\nk = 2\nvariant = knockoff\nstatistic = lsm\n"
        << "replicates = 3\nbase_seed = 8\ngrid_size = 20\nmin_ratio = 0.01\n"
        << "folds = 5\n";
  }
  const auto sim = run("simulate --scenario " + cfg + " --out " + kWork + "/sim1");
  REQUIRE(sim.exit_code == 0);
  const std::string csv = slurp(kWork + "/sim1/replicates.csv");
  CHECK(csv.find("replicate,failed,selected_size,tp,fp,fn,hd,fdp,power") !=
        std::string::npos);
  // 3 replicates + header
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  REQUIRE(run("simulate --scenario " + cfg + " --out " + kWork + "/sim2")
              .exit_code == 0);
  CHECK(slurp(kWork + "/sim1/summary.json") == slurp(kWork + "/sim2/summary.json"));
  CHECK(slurp(kWork + "/sim1/replicates.csv") ==
        slurp(kWork + "/sim2/replicates.csv"));

  // a select output with --pred-error feeds the report table
  const auto sel = run("select --input " + kWork +
                       "/d.csv --response y --statistic lsm --q 0.4 --k 2 "
                       "--variant knockoff --grid-size 20 --min-ratio 1e-2 "
                       "--seed 5 --pred-error --pred-folds 5 --out " +
                       kWork + "/selp");
  REQUIRE(sel.exit_code == 0);
  const auto baseline = run("select --input " + kWork +
                            "/d.csv --response y --baseline empty "
                            "--pred-error --pred-folds 5 --seed 5 --out " +
                            kWork + "/selb");
  REQUIRE(baseline.exit_code == 0);
  const auto rep = run("report --inputs " + kWork + "/selp/selection.json " +
                       kWork + "/selb/selection.json --out " + kWork +
                       "/report.csv");
  REQUIRE(rep.exit_code == 0);
  CHECK(rep.output.find("Method") != std::string::npos);
  CHECK(rep.output.find("Model size") != std::string::npos);
  CHECK(rep.output.find("Pred. error") != std::string::npos);
  CHECK(rep.output.find("AFDR LSM") != std::string::npos);
  CHECK(rep.output.find("Empty") != std::string::npos);
  const std::string report_csv = slurp(kWork + "/report.csv");
  CHECK(report_csv.find("method,model_size,pred_error") != std::string::npos);
}
