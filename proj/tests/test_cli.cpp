#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "netgee/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = NETGEE_CLI_PATH;
const fs::path kData = NETGEE_TEST_DATA;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("netgee_cli_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json load_json(const fs::path& p) {
  json j;
  std::ifstream f(p);
  f >> j;
  return j;
}

}  // namespace

TEST_CASE("simulate writes graphs and is deterministic per seed") {
  TempDir t1, t2;
  const std::string common =
      "simulate --n 60 --k 6 --p 0.8 --q 0 --link identity --reps 2 --seed 7 ";
  REQUIRE(run(common + "--out-dir " + t1.path.string()) == 0);
  REQUIRE(run(common + "--out-dir " + t2.path.string()) == 0);
  for (const std::string name :
       {"graph_000.csv", "design_000.csv", "outcomes_000.csv", "graph_001.csv",
        "planted_labels.csv"}) {
    REQUIRE(fs::exists(t1.path / name));
    REQUIRE(slurp(t1.path / name) == slurp(t2.path / name));
  }
  REQUIRE(fs::exists(t1.path / "manifest.json"));
  const json manifest = load_json(t1.path / "manifest.json");
  REQUIRE(manifest["command"] == "simulate");
  REQUIRE(manifest["config"]["n"] == 60);
}

TEST_CASE("simulate rejects n not divisible by k") {
  TempDir t;
  REQUIRE(run("simulate --n 201 --k 20 --out-dir " + t.path.string()) == 2);
}

TEST_CASE("fit runs on simulated data and honors zmode/corr") {
  TempDir t;
  REQUIRE(run("simulate --n 60 --k 6 --p 0.8 --q 0 --reps 1 --seed 3 --out-dir " +
              t.path.string()) == 0);
  const std::string base = " --graph " + (t.path / "graph_000.csv").string() +
                           " --design " + (t.path / "design_000.csv").string() +
                           " --outcome " + (t.path / "outcomes_000.csv").string();

  const auto fit_json = (t.path / "fit.json").string();
  const auto naive_json = (t.path / "naive.json").string();
  REQUIRE(run("fit" + base + " --corr indep --zmode full --detect oracle --labels " +
              (t.path / "planted_labels.csv").string() + " --out " + fit_json +
              " --partition-out " + (t.path / "part.csv").string()) == 0);
  REQUIRE(run("fit-naive" + base + " --out " + naive_json) == 0);

  const json fit = load_json(fit_json);
  const json naive = load_json(naive_json);
  // full-network + independence point estimates equal the naive fit
  REQUIRE(std::abs(fit["estimates"]["beta"].get<double>() -
                   naive["estimates"]["beta"].get<double>()) < 1e-8);
  const auto a1 = fit["estimates"]["alpha"].get<std::vector<double>>();
  const auto a2 = naive["estimates"]["alpha"].get<std::vector<double>>();
  for (std::size_t i = 0; i < a1.size(); ++i) REQUIRE(std::abs(a1[i] - a2[i]) < 1e-8);
}

TEST_CASE("fit reproduces the committed golden to 1e-8") {
  TempDir t;
  const fs::path fixture = kData / "fit_fixture";
  const auto out = (t.path / "fit.json").string();
  REQUIRE(run("fit --graph " + (fixture / "graph.csv").string() + " --design " +
              (fixture / "design.csv").string() + " --outcome " +
              (fixture / "outcome.csv").string() + " --labels " +
              (fixture / "labels.csv").string() +
              " --detect oracle --corr exch --zmode block --out " + out +
              " --partition-out " + (t.path / "part.csv").string()) == 0);
  const json got = load_json(out);
  const json golden = load_json(fixture / "golden_fit.json");
  REQUIRE(std::abs(got["estimates"]["beta"].get<double>() -
                   golden["estimates"]["beta"].get<double>()) < 1e-8);
  const auto ga = golden["estimates"]["alpha"].get<std::vector<double>>();
  const auto oa = got["estimates"]["alpha"].get<std::vector<double>>();
  REQUIRE(ga.size() == oa.size());
  for (std::size_t i = 0; i < ga.size(); ++i) REQUIRE(std::abs(ga[i] - oa[i]) < 1e-8);
  for (const char* key : {"sandwich_cov", "naive_cov"}) {
    const auto gm = golden[key]["data_row_major"].get<std::vector<double>>();
    const auto om = got[key]["data_row_major"].get<std::vector<double>>();
    REQUIRE(gm.size() == om.size());
    for (std::size_t i = 0; i < gm.size(); ++i) REQUIRE(std::abs(gm[i] - om[i]) < 1e-8);
  }
}

TEST_CASE("fit exits 2 on a missing file") {
  REQUIRE(run("fit --graph /nonexistent/graph.csv --design d.csv --outcome y.csv") == 2);
}

TEST_CASE("pipeline builds the five-country fixture deterministically") {
  TempDir t1, t2;
  const fs::path fixture = kData / "pipeline_fixture";
  const std::string base = "pipeline --flights " + (fixture / "flights.csv").string() +
                           " --covariates " + (fixture / "covariates.csv").string();
  REQUIRE(run(base + " --mode unweighted --outcome aid --out-dir " + t1.path.string()) == 0);
  REQUIRE(run(base + " --mode unweighted --outcome aid --out-dir " + t2.path.string()) == 0);
  for (const std::string name :
       {"adjacency.csv", "design.csv", "outcome.csv", "countries.csv"})
    REQUIRE(slurp(t1.path / name) == slurp(t2.path / name));

  // against the committed goldens
  REQUIRE(slurp(t1.path / "adjacency.csv") == slurp(fixture / "golden_adjacency.csv"));
  REQUIRE(slurp(t1.path / "design.csv") == slurp(fixture / "golden_design.csv"));
  REQUIRE(slurp(t1.path / "outcome.csv") == slurp(fixture / "golden_outcome_aid.csv"));

  const json report = load_json(t1.path / "join_report.json");
  // 20 off-diagonal counts: twelve zeros then 1,2,3,4,7,9,12,15, so the
  // interpolated Q3 sits at 3 + 0.25 * (4 - 3)
  REQUIRE(report["q3"].get<double>() == Catch::Approx(3.25));
  REQUIRE(report["aid_median"].get<double>() == Catch::Approx(80.0));
}

TEST_CASE("pipeline weighted mode divides counts by population per million") {
  TempDir t;
  const fs::path fixture = kData / "pipeline_fixture";
  REQUIRE(run("pipeline --flights " + (fixture / "flights.csv").string() +
              " --covariates " + (fixture / "covariates.csv").string() +
              " --mode weighted --outcome incidence --out-dir " + t.path.string()) == 0);
  const Eigen::MatrixXd a = netgee::read_matrix_csv((t.path / "adjacency.csv").string());
  // AA -> BB: 12 flights, BB population 2e7 -> 12 / 20 = 0.6
  REQUIRE(a(0, 1) == Catch::Approx(0.6));
}

TEST_CASE("pipeline exits 2 on malformed input") {
  TempDir t;
  const auto bad = t.path / "bad.csv";
  std::ofstream(bad) << "US,FR,notanumber\n";
  const fs::path fixture = kData / "pipeline_fixture";
  REQUIRE(run("pipeline --flights " + bad.string() + " --covariates " +
              (fixture / "covariates.csv").string() + " --out-dir " +
              t.path.string()) == 2);
}

TEST_CASE("reproduce ratecheck emits the ladder diagnostics") {
  TempDir t;
  REQUIRE(run("reproduce ratecheck --scale desk --seed 5 --threads 2 --out-dir " +
              t.path.string()) == 0);
  const std::string csv = slurp(t.path / "ratecheck.csv");
  REQUIRE(csv.find("m,K,sd_scaled_p,sd_scaled_q") == 0);
  // header + 3 ladder sizes
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 4);
  const json report = load_json(t.path / "comparison_report.json");
  REQUIRE(report["p_nonincreasing_20pct_slack"].get<bool>());
  REQUIRE(report["q_nonincreasing_20pct_slack"].get<bool>());
}

TEST_CASE("json config file feeds options") {
  TempDir t;
  const auto cfg = t.path / "cfg.json";
  std::ofstream(cfg) << R"({"n": 40, "k": 4, "p": 0.9, "q": 0.0, "reps": 1, "seed": 9})";
  REQUIRE(run("simulate --config " + cfg.string() + " --out-dir " + t.path.string()) == 0);
  const json manifest = load_json(t.path / "manifest.json");
  REQUIRE(manifest["config"]["n"] == 40);
  REQUIRE(manifest["config"]["k"] == 4);
}

TEST_CASE("unknown flags exit 2") {
  REQUIRE(run("simulate --definitely-not-a-flag 1") == 2);
  REQUIRE(run("reproduce not-a-target") == 2);
}
