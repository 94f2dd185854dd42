#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "experiments.hpp"
#include "oracles.hpp"

using namespace nlpme;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string minimal_config(const std::string& out_dir) {
  return R"([grid]
dim = 1
L = 12.0
n = 64

[operator]
s = 0.5

[nonlinearity]
kind = "power"
m = 2.0

[solver]
t_end = 0.2
dt_max = 0.005

[initial]
kind = "gaussian"
mass = 1.0
width = 1.5

[observer]
cadence = 0.1
lp_set = [2.0, 3.0]

[output]
dir = ")" + out_dir + "\"\n";
}

} // namespace

TEST_CASE("initial data: gaussian, box, mollified dirac mass renormalization") {
  auto g = Grid::make(1, 16.0, 256);
  InitialDataSpec spec;
  spec.kind = InitialDataSpec::Kind::gaussian;
  spec.mass = 1.0;
  spec.width = 1.0;
  double factor = 0.0;
  Field u = make_initial(spec, g, &factor);
  CHECK(mass(u) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(factor - 1.0) < 1e-6); // well resolved gaussian barely corrected

  spec.kind = InitialDataSpec::Kind::mollified_dirac;
  spec.mollifier_width = 0.5;
  Field d = make_initial(spec, g);
  CHECK(mass(d) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(lp_norm(d, kInfinity) > 0.5); // a single bump
  CHECK(support_radius(d, 1e-14) <= 0.5 + g->dx());

  spec.kind = InitialDataSpec::Kind::box;
  spec.mass = 3.0;
  spec.width = 2.0;
  Field b = make_initial(spec, g);
  CHECK(mass(b) == doctest::Approx(3.0).epsilon(1e-14));
  // height == mass / (2w) up to the discrete renormalization
  CHECK(lp_norm(b, kInfinity) == doctest::Approx(0.75).epsilon(0.05));

  spec.width = 0.05; // unresolvable on this grid
  CHECK_THROWS_AS(make_initial(spec, g), ConfigError);

  // off-center datum in 2D
  auto g2 = Grid::make(2, 8.0, 32);
  InitialDataSpec c2;
  c2.kind = InitialDataSpec::Kind::gaussian;
  c2.mass = 2.0;
  c2.width = 1.2;
  c2.center = {1.0, -2.0};
  Field f2 = make_initial(c2, g2);
  CHECK(mass(f2) == doctest::Approx(2.0).epsilon(1e-14));
  double x[2];
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < f2.size(); ++i)
    if (f2[i] > f2[argmax]) argmax = i;
  g2->node_position(argmax, x);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(0.26));
  CHECK(x[1] == doctest::Approx(-2.0).epsilon(0.26));
}

TEST_CASE("config tree: toml subset, json, overrides, unknown keys") {
  const std::string toml = R"(
# comment
title = "x"            # inline comment
[grid]
dim = 2
L = 8.0
flags = [1.0, 2.5, -3.0]
names = ["a", "b"]
deep = true
)";
  ConfigTree tree = ConfigTree::parse_toml(toml);
  CHECK(tree.get_string("title", "") == "x");
  CHECK(tree.get_int("grid.dim", 0) == 2);
  CHECK(tree.get_number("grid.L", 0.0) == doctest::Approx(8.0));
  CHECK(tree.get_numbers("grid.flags", {}) == std::vector<double>{1.0, 2.5, -3.0});
  CHECK(tree.get_bool("grid.deep", false));
  CHECK_THROWS_AS(tree.get_number("grid.deep", 0.0), ConfigError);
  // "grid.names" untouched: unconsumed keys are hard errors
  CHECK_THROWS_AS(tree.reject_unconsumed(), ConfigError);

  ConfigTree json = ConfigTree::parse_json(R"({"grid": {"dim": 1, "L": 4.0}, "flag": true})");
  CHECK(json.get_int("grid.dim", 0) == 1);
  CHECK(json.get_bool("flag", false));

  ConfigTree ovr = ConfigTree::parse_toml("[solver]\nt_end = 1.0\n");
  ovr.apply_overrides("solver.t_end=2.5\nsolver.extra=\"x\"");
  CHECK(ovr.get_number("solver.t_end", 0.0) == doctest::Approx(2.5));
  CHECK(ovr.get_string("solver.extra", "") == "x");

  CHECK_THROWS_AS(ConfigTree::parse_toml("[bad\n"), ConfigError);
  CHECK_THROWS_AS(ConfigTree::parse_toml("x y z\n"), ConfigError);
  CHECK_THROWS_AS(ConfigTree::parse_toml("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(ConfigTree::parse_json("{nope"), ConfigError);
}

TEST_CASE("scenario: artifacts, checks, determinism") {
  TempDir tmp("nlpme_scenario_test");
  const std::string cfg_path = (tmp.path / "run.toml").string();
  const std::string out_dir = (tmp.path / "artifacts").string();
  {
    std::ofstream out(cfg_path);
    out << minimal_config(out_dir);
  }

  ScenarioResult result = run_scenario(cfg_path);
  CHECK(result.exit_status == 0);
  CHECK_FALSE(result.aborted);
  CHECK(fs::exists(fs::path(out_dir) / "ledger.csv"));
  CHECK(fs::exists(fs::path(out_dir) / "report.json"));
  CHECK(fs::exists(fs::path(out_dir) / "config_snapshot.toml"));
  CHECK(fs::exists(fs::path(out_dir) / "snap_t0.f64"));
  CHECK(fs::exists(fs::path(out_dir) / "snap_t0.2.f64"));

  // all standard checks present and passing
  REQUIRE(result.checks.size() >= 5);
  for (const auto& c : result.checks) {
    INFO(c.name);
    CHECK(c.pass);
  }

  // determinism: identical config -> byte-identical ledger
  const std::string ledger_a = read_file(fs::path(out_dir) / "ledger.csv");
  ScenarioResult again = run_scenario(cfg_path);
  CHECK(read_file(fs::path(out_dir) / "ledger.csv") == ledger_a);
  CHECK(again.exit_status == 0);

  // malformed config: unknown key
  const std::string bad_path = (tmp.path / "bad.toml").string();
  {
    std::ofstream out(bad_path);
    out << minimal_config(out_dir) << "\n[solver]\n"; // duplicate section ok, but...
  }
  {
    std::ofstream out(bad_path);
    out << minimal_config(out_dir) << "\n[typo]\nkey = 1.0\n";
  }
  CHECK_THROWS_AS(run_scenario(bad_path), ConfigError);
}

TEST_CASE("scenario: from_file initial datum round trip") {
  TempDir tmp("nlpme_fromfile_test");
  auto g = Grid::make(1, 12.0, 64);
  Field u = Field::sample(g, [](const double* x) { return oracle::gaussian(x, 1, 1.0, 1.5); });
  const std::string base = (tmp.path / "datum").string();
  write_snapshot(u, base, 0.0, "");

  InitialDataSpec spec;
  spec.kind = InitialDataSpec::Kind::from_file;
  spec.path = base;
  Field loaded = make_initial(spec, g);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(loaded[i] == u[i]);

  auto g_wrong = Grid::make(1, 12.0, 128);
  CHECK_THROWS_AS(make_initial(spec, g_wrong), ConfigError);
}

TEST_CASE("sweep: 2x2 product, isolation, summary") {
  TempDir tmp("nlpme_sweep_test");
  const std::string base_path = (tmp.path / "base.toml").string();
  {
    std::ofstream out(base_path);
    out << minimal_config((tmp.path / "unused").string());
  }
  const std::string spec_path = (tmp.path / "sweep.toml").string();
  {
    std::ofstream out(spec_path);
    out << "[sweep]\nbase = \"base.toml\"\njobs = 2\noutput_dir = \""
        << (tmp.path / "sweep_out").string() << "\"\n[axes]\n\"nonlinearity.m\" = [1.5, 2.5]\n\"operator.s\" = [0.25, 0.75]\n";
  }

  SweepResult result = sweep(spec_path);
  CHECK(result.exit_status == 0);
  REQUIRE(result.rows.size() == 4);
  for (const auto& row : result.rows) {
    CHECK(row.exit_status == 0);
    CHECK(fs::exists(fs::path(row.dir) / "ledger.csv"));
  }
  // all (m, s) combinations appear exactly once
  std::set<std::pair<double, double>> combos;
  for (const auto& row : result.rows) combos.insert({row.m, row.s});
  CHECK(combos.size() == 4);

  const std::string summary = read_file(fs::path(result.output_dir) / "summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 5); // header + 4 rows

  // consolidated report over the sweep tree
  CHECK(emit_report(result.output_dir) == 0);
  CHECK(fs::exists(fs::path(result.output_dir) / "consolidated.json"));
  CHECK(fs::exists(fs::path(result.output_dir) / "consolidated.csv"));
}

TEST_CASE("emit_report: empty directory gives an empty run list") {
  TempDir tmp("nlpme_report_empty");
  CHECK(emit_report(tmp.path.string()) == 0);
  const std::string text = read_file(tmp.path / "consolidated.json");
  CHECK(text.find("\"runs\": []") != std::string::npos);
  CHECK_THROWS_AS(emit_report((tmp.path / "missing").string()), ConfigError);
}

TEST_CASE("output root override via NLPME_OUT") {
  setenv("NLPME_OUT", "/tmp/nlpme_root", 1);
  CHECK(resolve_output_dir("rel/dir") == "/tmp/nlpme_root/rel/dir");
  CHECK(resolve_output_dir("/abs/dir") == "/abs/dir");
  unsetenv("NLPME_OUT");
  CHECK(resolve_output_dir("rel/dir") == "rel/dir");
}

TEST_CASE("check-ops battery passes and serializes") {
  CheckOpsReport report = check_ops();
  CHECK(report.all_passed);
  const std::string json = report.json();
  CHECK(json.find("eigenfunction_exactness") != std::string::npos);
  CHECK(json.find("stroock_varopoulos") != std::string::npos);
}

TEST_CASE("preset: fractional_heat runs clean through the scenario layer") {
  TempDir tmp("nlpme_preset_test");
  ScenarioResult result = run_scenario("presets/fractional_heat.toml",
                                       "output.dir=\"" + (tmp.path / "fh").string() + "\"");
  CHECK(result.exit_status == 0);
  CHECK_FALSE(result.aborted);
}
