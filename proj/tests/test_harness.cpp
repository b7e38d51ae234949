#include "doctest.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "qspin/cli.hpp"
#include "qspin/config.hpp"
#include "qspin/error.hpp"
#include "qspin/harness.hpp"

using namespace qspin;
using doctest::Approx;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("qspin_test_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kSmallPhase = R"(
kind = phase-diagram
dim = 2
side = 8
r_star = 1
lambda = 0.3, 3.0
lambda_star = 1.4
measure = ising
beta = 0.05, 1.0
replicates = 2
sweeps = 300
burn_in = 100
seed = 17
)";

}  // namespace

TEST_CASE("config parsing") {
  const auto c = ExperimentConfig::from_text(kSmallPhase);
  CHECK(c.kind == "phase-diagram");
  CHECK(c.lambdas == std::vector<double>{0.3, 3.0});
  CHECK(c.replicates == 2);
  CHECK(c.lambda_star.value() == 1.4);
  CHECK_FALSE(c.a.has_value());
  CHECK(c.hash() == ExperimentConfig::from_text(std::string(kSmallPhase) + "\n# trailing comment\n").hash());
  CHECK(c.hash() != ExperimentConfig::from_text(std::string(kSmallPhase) + "thin = 2\n").hash());

  CHECK_THROWS_AS(ExperimentConfig::from_text("kind = chain\nbogus = 1\n"), InvalidParameter);
  CHECK_THROWS_AS(ExperimentConfig::from_text("kind = chain\nseed = 1\nseed = 2\n"), InvalidParameter);
  CHECK_THROWS_AS(ExperimentConfig::from_text("kind = percolation-sweep\ngrid = 1, 3, 2\n").validate(), InvalidParameter);
  CHECK_THROWS_AS(ExperimentConfig::from_text("kind = nonsense\n").validate(), InvalidParameter);
  CHECK_THROWS_AS(ExperimentConfig::from_text("kind = chain\nreplicates = 0\n").validate(), InvalidParameter);
}

TEST_CASE("phase diagram mirror and evidence") {
  const auto c = ExperimentConfig::from_text(kSmallPhase);
  const auto res = compute_phase_diagram(c, 1.4, 1);
  REQUIRE(res.summary.size() == 4);
  REQUIRE(res.cells.size() == 8);
  for (const auto& cell : res.cells) {
    CHECK(cell.m_minus == -cell.m_plus);
    CHECK(cell.se_minus == cell.se_plus);
  }
  CHECK_FALSE(res.beta_star[0].has_value());
  CHECK(res.beta_star[1].has_value());
  for (const auto& s : res.summary) {
    CHECK(s.difference == Approx(s.m_plus - s.m_minus));
    CHECK(s.joint_se == Approx(s.se_plus + s.se_minus));
    CHECK(s.evidence == (s.difference > 3.0 * s.joint_se));
  }
  // Hot end: no separation.
  CHECK_FALSE(res.at(0, 0).evidence);
  CHECK_FALSE(res.at(1, 0).evidence);
  CHECK(res.at(1, 1).m_plus > res.at(1, 0).m_plus);
}

TEST_CASE("subcritical grid is rejected") {
  auto c = ExperimentConfig::from_text(kSmallPhase);
  c.lambdas = {0.3, 0.5};
  CHECK_THROWS_AS(run_phase_diagram(c, 1), InvalidParameter);
}

TEST_CASE("window weight integral against an independent quadrature") {
  for (double side : {2.0, 6.0, 20.0})
    for (double alpha : {0.5, 1.0, 2.0}) {
      const double h = side / 2.0;
      auto outer = [&](double x) {
        return GK::integrate([&](double y) { return std::exp(-alpha * std::hypot(x, y)); }, 0.0, h, 8, 1e-12);
      };
      const double ref = 4.0 * GK::integrate(outer, 0.0, h, 8, 1e-11);
      CHECK(window_weight_integral(BoxWindow{2, side, BoundaryMode::free}, alpha) == Approx(ref).epsilon(1e-9));
    }
  // Large windows approach the whole-space value.
  CHECK(window_weight_integral(BoxWindow{2, 80.0, BoundaryMode::free}, 1.0) == Approx(2.0 * M_PI).epsilon(1e-9));
  CHECK(window_weight_integral(BoxWindow{3, 60.0, BoundaryMode::free}, 1.0) == Approx(8.0 * M_PI).epsilon(1e-7));
}

TEST_CASE("sparsity report aggregates") {
  const auto c = ExperimentConfig::from_text(
      "kind = sparsity-report\nside = 12\nlambda = 0.5, 1.5\nalpha = 1\ntheta = 1\nreplicates = 40\nseed = 3\n");
  const auto res = run_sparsity_report(c, 1);
  REQUIRE(res.aggregates.size() == 2);
  CHECK(res.reports.size() == 80);
  for (const auto& g : res.aggregates) {
    CHECK(g.replicates == 40);
    CHECK(g.a_within_bound);
    CHECK(g.b_consistent);
    CHECK(g.expected_b == Approx(g.lambda * window_weight_integral(BoxWindow{2, 12.0, BoundaryMode::free}, 1.0)));
  }
  CHECK(res.aggregates[1].mean_a > res.aggregates[0].mean_a);
}

TEST_CASE("outputs are identical across thread counts") {
  const auto c = ExperimentConfig::from_text(kSmallPhase);
  const auto d1 = scratch("t1"), d3 = scratch("t3");
  const auto m1 = run_experiment(c, d1.string(), 1);
  const auto m3 = run_experiment(c, d3.string(), 3);
  CHECK(m1.config_hash == c.hash());
  CHECK(m1.outputs == m3.outputs);
  REQUIRE_FALSE(m1.outputs.empty());
  for (const auto& f : m1.outputs) {
    CAPTURE(f);
    CHECK(fs::exists(d1 / f));
    CHECK(slurp(d1 / f) == slurp(d3 / f));
  }
  const auto man = json::parse(slurp(d1 / "manifest.json"));
  for (const char* key : {"config_hash", "seeds", "artifact_version", "wall_clock_seconds", "outputs"})
    CHECK(man.contains(key));
  CHECK(man["artifact_version"] == kArtifactVersion);
  for (const auto& [desc, ok] : check_outputs(d1.string())) {
    CAPTURE(desc);
    CHECK(ok);
  }
  fs::remove_all(d1);
  fs::remove_all(d3);
}

TEST_CASE("chain outputs") {
  const auto c = ExperimentConfig::from_text(
      "kind = chain\nside = 6\nlambda = 2\nmeasure = uniform:1\nbeta = 0.5\nsweeps = 200\nburn_in = 50\n"
      "replicates = 2\nseed = 9\n");
  const auto d = scratch("chain");
  run_experiment(c, d.string(), 1);
  for (int r = 0; r < 2; ++r) {
    std::ifstream in(d / "sweeps" / ("chain_r" + std::to_string(r) + ".csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "sweep,magnetization,energy");
  }
  const auto j = json::parse(slurp(d / "chain.json"));
  REQUIRE(j["runs"].size() == 2);
  for (const char* key : {"beta", "lambda", "s", "m_mean", "m_se", "tau_int", "seeds"}) CHECK(j["runs"][0].contains(key));
  CHECK(fs::exists(d / "points" / "points.csv"));
  CHECK(fs::exists(d / "graphs" / "edges.csv"));
  fs::remove_all(d);
}

TEST_CASE("cli exit codes and outputs") {
  SUBCASE("unknown flag") {
    const auto r = cli({"gen", "--no-such-flag", "1"});
    CHECK(r.code == kExitInvalid);
    CHECK(r.err.find("Usage") != std::string::npos);
  }
  SUBCASE("invalid parameter") {
    CHECK(cli({"gen", "--lambda", "-1", "--side", "4"}).code == kExitInvalid);
    CHECK(cli({"wells", "--measure", "nonsense"}).code == kExitInvalid);
  }
  SUBCASE("gen writes a csv and manifest") {
    const auto d = scratch("gen");
    const auto file = (d / "pts.csv").string();
    const auto r = cli({"gen", "--lambda", "1", "--side", "5", "--seed", "4", "-o", file});
    CHECK(r.code == kExitOk);
    CHECK(fs::exists(file));
    const auto man = json::parse(slurp(file + ".manifest.json"));
    CHECK(man["seeds"].contains("points"));
    // Same seed, same bytes.
    const auto again = cli({"gen", "--lambda", "1", "--side", "5", "--seed", "4"});
    CHECK(again.out == slurp(file));
    fs::remove_all(d);
  }
  SUBCASE("percolate json") {
    const auto r = cli({"percolate", "--sizes", "16,32", "--grid", "1.0,1.2,1.4,1.6,1.8,2.0", "--replicates", "60",
                        "--bootstrap", "20", "--seed", "2"});
    REQUIRE(r.code == kExitOk);
    const auto j = json::parse(r.out);
    for (const char* key : {"parameter", "estimate", "ci_low", "ci_high", "seeds"}) CHECK(j.contains(key));
    CHECK(j["ci_low"].get<double>() <= j["estimate"].get<double>());
  }
  SUBCASE("runtime failure") {
    // Too few replicates on small windows: these curves never cross.
    const auto r = cli({"percolate", "--sizes", "8,16", "--grid", "1.0,1.2,1.4,1.6,1.8,2.0", "--replicates", "30",
                        "--bootstrap", "20", "--seed", "2"});
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.find("cross") != std::string::npos);
  }
  SUBCASE("report --check") {
    const auto d = scratch("report");
    std::ofstream(d / "threshold.json") << R"({"estimate": 1.5, "ci_low": 1.6, "ci_high": 1.7})";
    CHECK(cli({"report", d.string(), "--check"}).code == kExitCheckFailed);
    std::ofstream(d / "threshold.json", std::ios::trunc) << R"({"estimate": 1.65, "ci_low": 1.6, "ci_high": 1.7})";
    CHECK(cli({"report", d.string(), "--check"}).code == kExitOk);
    fs::remove_all(d);
  }
  SUBCASE("sweep runs a config") {
    const auto d = scratch("sweep");
    std::ofstream(d / "run.toml") << kSmallPhase;
    const auto r = cli({"--threads", "2", "sweep", (d / "run.toml").string(), "-o", (d / "out").string()});
    CHECK(r.code == kExitOk);
    CHECK(fs::exists(d / "out" / "manifest.json"));
    CHECK(fs::exists(d / "out" / "sweeps" / "phase_diagram.csv"));
    CHECK(cli({"report", (d / "out").string(), "--svg"}).code == kExitOk);
    CHECK(fs::exists(d / "out" / "phase_diagram.svg"));
    fs::remove_all(d);
  }
}
