#include "experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace fs = std::filesystem;

namespace nlpme {

namespace {

constexpr int kSchemaVersion = 1;

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

double radial_distance(const Grid& g, std::size_t flat) {
  double x[2] = {0.0, 0.0};
  g.node_position(flat, x);
  return g.dim() == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]);
}

/// mass fraction beyond |x| > L/2, for the box-adequacy rule
double outer_mass_fraction(const Field& u) {
  const Grid& g = u.grid();
  double outer = 0.0, total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double v = std::abs(u[i]);
    total += v;
    if (radial_distance(g, i) > 0.5 * g.half_length()) outer += v;
  }
  return total > 0.0 ? outer / total : 0.0;
}

nlohmann::json check_to_json(const CheckResult& c) {
  return {{"name", c.name}, {"pass", c.pass}, {"asserted", c.asserted},
          {"slack", c.slack}, {"tol", c.tol}};
}

} // namespace

// ---------------------------------------------------------------------------
// Initial data.
// ---------------------------------------------------------------------------

void InitialDataSpec::validate(const Grid& grid) const {
  if (kind == Kind::from_file) {
    if (path.empty()) throw ConfigError("initial: from_file requires a path");
    return;
  }
  if (!(mass > 0.0)) throw ConfigError("initial: mass must be > 0");
  const double resolved = kind == Kind::mollified_dirac ? mollifier_width : width;
  if (!(resolved > 2.0 * grid.dx()))
    throw ConfigError("initial: width " + format_g(resolved) +
                      " is unresolvable (needs > 2 dx = " + format_g(2.0 * grid.dx()) + ")");
  if (!center.empty() && center.size() != static_cast<std::size_t>(grid.dim()))
    throw ConfigError("initial: center must have one entry per dimension");
}

Field make_initial(const InitialDataSpec& spec, const GridPtr& grid, double* renorm_factor) {
  spec.validate(*grid);
  if (renorm_factor) *renorm_factor = 1.0;
  if (spec.kind == InitialDataSpec::Kind::from_file) {
    Field f = read_snapshot(spec.path);
    if (f.grid().dim() != grid->dim() || f.grid().points_per_axis() != grid->points_per_axis() ||
        f.grid().half_length() != grid->half_length())
      throw ConfigError("initial: snapshot grid does not match the configured grid");
    return Field(grid, std::vector<double>(f.values().begin(), f.values().end()));
  }

  std::vector<double> c(static_cast<std::size_t>(grid->dim()), 0.0);
  for (std::size_t i = 0; i < spec.center.size(); ++i) c[i] = spec.center[i];

  Field f(grid);
  const int dim = grid->dim();
  double x[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < f.size(); ++i) {
    grid->node_position(i, x);
    double r2 = 0.0, linf = 0.0;
    for (int a = 0; a < dim; ++a) {
      const double d = x[a] - c[static_cast<std::size_t>(a)];
      r2 += d * d;
      linf = std::max(linf, std::abs(d));
    }
    switch (spec.kind) {
      case InitialDataSpec::Kind::gaussian: {
        const double sigma = spec.width;
        const double norm = std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.5 * dim);
        f[i] = spec.mass * norm * std::exp(-0.5 * r2 / (sigma * sigma));
        break;
      }
      case InitialDataSpec::Kind::box: {
        const double w = spec.width;
        f[i] = linf <= w ? spec.mass / std::pow(2.0 * w, dim) : 0.0;
        break;
      }
      case InitialDataSpec::Kind::mollified_dirac: {
        const double eta = spec.mollifier_width;
        const double rho2 = r2 / (eta * eta);
        f[i] = rho2 < 1.0 ? std::exp(-1.0 / (1.0 - rho2)) : 0.0;
        break;
      }
      case InitialDataSpec::Kind::from_file:
        break; // handled above
    }
  }
  const double discrete_mass = mass(f);
  if (!(discrete_mass > 0.0)) throw ConfigError("initial: datum has no mass on this grid");
  const double factor = spec.mass / discrete_mass;
  for (auto& v : f.values()) v *= factor;
  if (renorm_factor) *renorm_factor = factor;
  return f;
}

// ---------------------------------------------------------------------------
// Configuration assembly.
// ---------------------------------------------------------------------------

ScenarioConfig ScenarioConfig::from_tree(ConfigTree& tree) {
  ScenarioConfig cfg;
  cfg.dim = tree.get_int("grid.dim", 1);
  cfg.half_length = tree.get_number("grid.L", 16.0);
  cfg.points = tree.get_int("grid.n", 256);

  cfg.solver.s = tree.require_number("operator.s");
  cfg.solver.epsilon = tree.get_number("operator.epsilon", 0.0);
  const std::string mode = tree.get_string(
      "operator.mode", cfg.solver.epsilon > 0.0 ? "regularized_symbol" : "exact_symbol");
  if (mode == "exact_symbol")
    cfg.solver.operator_mode = OperatorMode::exact_symbol;
  else if (mode == "regularized_symbol")
    cfg.solver.operator_mode = OperatorMode::regularized_symbol;
  else if (mode == "regularized_kernel")
    cfg.solver.operator_mode = OperatorMode::regularized_kernel;
  else
    throw ConfigError("operator.mode: unknown mode '" + mode + "'");

  const std::string kind = tree.get_string("nonlinearity.kind", "power");
  if (kind == "power")
    cfg.solver.nonlinearity.kind = MobilityKind::power;
  else if (kind == "shifted_power")
    cfg.solver.nonlinearity.kind = MobilityKind::shifted_power;
  else if (kind == "log_mobility")
    cfg.solver.nonlinearity.kind = MobilityKind::log_mobility;
  else
    throw ConfigError("nonlinearity.kind: unknown kind '" + kind + "'");
  cfg.solver.nonlinearity.m = tree.get_number("nonlinearity.m", 2.0);
  cfg.solver.nonlinearity.mu = tree.get_number("nonlinearity.mu", 0.0);

  const std::string scheme = tree.get_string("solver.scheme", "explicit_upwind");
  if (scheme == "explicit_upwind")
    cfg.solver.scheme = Scheme::explicit_upwind;
  else if (scheme == "semi_implicit")
    cfg.solver.scheme = Scheme::semi_implicit;
  else if (scheme == "duhamel")
    cfg.solver.scheme = Scheme::duhamel;
  else
    throw ConfigError("solver.scheme: unknown scheme '" + scheme + "'");
  cfg.solver.delta = tree.get_number("solver.delta", 0.0);
  cfg.solver.t_end = tree.get_number("solver.t_end", 1.0);
  cfg.solver.cfl_safety = tree.get_number("solver.cfl_safety", 0.5);
  cfg.solver.dt_max = tree.get_number("solver.dt_max", 1e-2);
  cfg.solver.duhamel_window = tree.get_number("solver.duhamel_window", 0.05);
  cfg.solver.duhamel_tol = tree.get_number("solver.duhamel_tol", 1e-8);
  cfg.solver.duhamel_max_iter = tree.get_int("solver.duhamel_max_iter", 50);
  cfg.solver.duhamel_nodes = tree.get_int("solver.duhamel_nodes", 32);

  const std::string initial = tree.get_string("initial.kind", "gaussian");
  if (initial == "gaussian")
    cfg.initial.kind = InitialDataSpec::Kind::gaussian;
  else if (initial == "box")
    cfg.initial.kind = InitialDataSpec::Kind::box;
  else if (initial == "mollified_dirac")
    cfg.initial.kind = InitialDataSpec::Kind::mollified_dirac;
  else if (initial == "from_file")
    cfg.initial.kind = InitialDataSpec::Kind::from_file;
  else
    throw ConfigError("initial.kind: unknown kind '" + initial + "'");
  cfg.initial.mass = tree.get_number("initial.mass", 1.0);
  cfg.initial.width = tree.get_number("initial.width", 1.0);
  cfg.initial.center = tree.get_numbers("initial.center", {});
  cfg.initial.mollifier_width = tree.get_number("initial.mollifier_width", 0.1);
  cfg.initial.path = tree.get_string("initial.path", "");

  cfg.observer.cadence = tree.get_number("observer.cadence", 0.1);
  cfg.observer.snapshot_times = tree.get_numbers("observer.snapshot_times", {});
  cfg.lp_set = tree.get_numbers("observer.lp_set", {2.0});
  cfg.support_threshold = tree.get_number("observer.support_threshold", -1.0);
  cfg.tail_r0 = tree.get_number("observer.tail_r0", 0.0);
  cfg.assert_checks = tree.get_bool("observer.assert_checks", true);

  cfg.output.dir = tree.get_string("output.dir", "out");
  cfg.output.write_snapshots = tree.get_bool("output.write_snapshots", true);
  cfg.output.snapshot_csv = tree.get_bool("output.snapshot_csv", false);

  tree.reject_unconsumed();
  cfg.solver.validate();
  return cfg;
}

std::string resolve_output_dir(const std::string& configured) {
  const char* root = std::getenv("NLPME_OUT");
  fs::path p(configured);
  if (root && *root && p.is_relative()) return (fs::path(root) / p).string();
  return configured;
}

// ---------------------------------------------------------------------------
// Scenario runner.
// ---------------------------------------------------------------------------

ScenarioResult run_scenario(ScenarioConfig config, const std::string& config_snapshot_text) {
  ScenarioResult result;
  result.m = config.solver.nonlinearity.m;
  result.s = config.solver.s;
  result.epsilon = config.solver.epsilon;
  result.delta = config.solver.delta;
  result.mu = config.solver.nonlinearity.mu;

  const std::string dir = resolve_output_dir(config.output.dir);
  result.artifact_dir = dir;
  fs::create_directories(dir);
  {
    std::ofstream snap(fs::path(dir) / "config_snapshot.toml", std::ios::trunc);
    snap << config_snapshot_text;
  }

  GridPtr grid = Grid::make(config.dim, config.half_length, config.points);
  double renorm = 1.0;
  Field u0 = make_initial(config.initial, grid, &renorm);

  std::vector<std::string> warnings;
  if (outer_mass_fraction(u0) > 1e-10)
    warnings.push_back("initial datum carries mass outside |x| > L/2; torus wrap-around may bias the run");
  if (std::abs(renorm - 1.0) > 1e-3)
    warnings.push_back("initial datum renormalized by " + format_g(renorm) + " to match the requested mass");

  LedgerConfig ledger_cfg;
  ledger_cfg.p_set = config.lp_set;
  ledger_cfg.support_threshold = config.support_threshold;
  ledger_cfg.tail_r0 = config.tail_r0;

  RunResult run_result = run(u0, config.solver, config.observer, ledger_cfg);
  result.aborted = run_result.aborted;
  result.abort_reason = run_result.abort_reason;

  // artifacts: ledger first so partial results survive aborts
  {
    std::ofstream csv(fs::path(dir) / "ledger.csv", std::ios::trunc);
    run_result.ledger.write_csv(csv);
  }
  if (config.output.write_snapshots) {
    for (const auto& sample : run_result.trajectory.samples) {
      const std::string base =
          (fs::path(dir) / ("snap_t" + format_g(sample.t))).string();
      write_snapshot(sample.field, base, sample.t, "", config.output.snapshot_csv);
    }
  }

  // standard checks from the ledger rows
  const auto& rows = run_result.ledger.rows();
  if (!rows.empty()) {
    const auto& r0 = rows.front();
    const double mass_scale = std::max(std::abs(r0.mass), 1e-300);
    double worst_mass = 0.0, worst_linf_rise = 0.0;
    for (const auto& r : rows) {
      worst_mass = std::max(worst_mass, std::abs(r.mass - r0.mass) / mass_scale);
    }
    for (std::size_t k = 1; k < rows.size(); ++k)
      worst_linf_rise = std::max(worst_linf_rise, rows[k].linf - rows[k - 1].linf);
    result.checks.push_back({"mass_conservation", worst_mass <= 1e-10, true, -worst_mass, 1e-10});
    result.checks.push_back(
        {"linf_nonincreasing", worst_linf_rise <= 1e-10, true, -worst_linf_rise, 1e-10});

    for (std::size_t j = 0; j < config.lp_set.size(); ++j) {
      const double p = config.lp_set[j];
      const double base = std::pow(r0.lp[j], p);
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& r : rows)
        worst = std::min(worst, (base - (std::pow(r.lp[j], p) + r.lp_diss[j])) /
                                    std::max(base, 1e-300));
      CheckResult c{"lp_energy_p" + format_g(p), worst >= -1e-2, true, worst, 1e-2};
      result.checks.push_back(c);
    }
    {
      const double base = std::max(rows.front().e2, 1e-300);
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& r : rows) worst = std::min(worst, (rows.front().e2 - (r.e2 + r.d2_acc)) / base);
      result.checks.push_back({"second_energy", worst >= -1e-2, true, worst, 1e-2});
    }
    {
      const double m = config.solver.nonlinearity.m;
      const bool asserted = m > 1.0 && m < 2.0;
      const double weight = std::abs((2.0 - m) * (3.0 - m));
      const double base = std::max(std::abs(rows.front().e1), 1e-300);
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& r : rows)
        worst = std::min(worst, (rows.front().e1 - (r.e1 + weight * r.d1_acc)) / base);
      result.checks.push_back({"first_energy", !asserted || worst >= -1e-2, asserted, worst, 1e-2});
    }

    result.support_radius_end = rows.back().support_radius;
    result.tail_min_end = rows.back().tail_min;

    // smoothing fit, when the run covers a decade in the decaying regime
    std::vector<std::pair<double, double>> t_linf;
    for (const auto& r : rows) t_linf.emplace_back(r.t, r.linf);
    try {
      result.smoothing = smoothing_fit(t_linf, config.dim, config.solver.nonlinearity.m,
                                       config.solver.s, 1.0);
    } catch (const std::runtime_error&) {
      // not enough decade coverage; fine for short runs
    }
  }

  if (!run_result.trajectory.samples.empty() &&
      outer_mass_fraction(run_result.trajectory.samples.back().field) > 1e-10)
    warnings.push_back("final state carries mass outside |x| > L/2; increase L for this run");

  for (const auto& w : warnings) std::cerr << "[nlpme] warning: " << w << "\n";

  bool all_pass = true;
  for (const auto& c : result.checks)
    if (c.asserted && !c.pass) all_pass = false;
  result.exit_status = result.aborted ? 3 : (config.assert_checks && !all_pass ? 1 : 0);

  nlohmann::json report = {
      {"schema_version", kSchemaVersion},
      {"kind", "scenario"},
      {"exit_status", result.exit_status},
      {"aborted", result.aborted},
      {"abort_reason", result.abort_reason},
      {"steps", run_result.steps},
      {"clamped", run_result.clamped},
      {"params",
       {{"dim", config.dim},
        {"L", config.half_length},
        {"n", config.points},
        {"m", result.m},
        {"s", result.s},
        {"epsilon", result.epsilon},
        {"delta", result.delta},
        {"mu", result.mu}}},
      {"support_radius_end", result.support_radius_end},
      {"tail_min_end", result.tail_min_end},
      {"warnings", warnings},
  };
  report["checks"] = nlohmann::json::array();
  for (const auto& c : result.checks) report["checks"].push_back(check_to_json(c));
  if (result.smoothing) {
    report["smoothing"] = {{"gamma_hat", result.smoothing->gamma_hat},
                           {"gamma_theory", result.smoothing->gamma_theory},
                           {"delta_theory", result.smoothing->delta_theory},
                           {"window_t_min", result.smoothing->window_t_min},
                           {"window_t_max", result.smoothing->window_t_max},
                           {"points", result.smoothing->points},
                           {"residual", result.smoothing->residual}};
  }
  {
    std::ofstream out(fs::path(dir) / "report.json", std::ios::trunc);
    out << report.dump(2) << "\n";
  }
  return result;
}

ScenarioResult run_scenario(const std::string& config_path, const std::string& overrides) {
  ConfigTree tree = ConfigTree::parse_file(config_path);
  if (!overrides.empty()) tree.apply_overrides(overrides);
  ScenarioConfig config = ScenarioConfig::from_tree(tree);

  std::ifstream in(config_path);
  std::stringstream text;
  text << in.rdbuf();
  if (!overrides.empty()) {
    text << "\n# applied overrides:\n";
    std::stringstream ss(overrides);
    std::string line;
    while (std::getline(ss, line, '\n'))
      if (!line.empty()) text << "# " << line << "\n";
  }
  return run_scenario(std::move(config), text.str());
}

// ---------------------------------------------------------------------------
// check-ops battery.
// ---------------------------------------------------------------------------

namespace {

Field harmonic(const GridPtr& g, int k, bool sine) {
  const double xi = g->frequency(k);
  return Field::sample(g, [&](const double* x) {
    return sine ? std::sin(xi * x[0]) : std::cos(xi * x[0]);
  });
}

double linf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Field smooth_random(const GridPtr& g, unsigned seed, bool nonneg) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  const int modes = 6;
  std::vector<double> a, b;
  for (int k = 0; k < modes; ++k) {
    a.push_back(amp(rng));
    b.push_back(amp(rng));
  }
  Field f = Field::sample(g, [&](const double* x) {
    double v = 0.0;
    for (int k = 0; k < modes; ++k) {
      const double xi = std::numbers::pi * (k + 1) / g->half_length();
      v += a[static_cast<std::size_t>(k)] * std::cos(xi * x[0]) +
           b[static_cast<std::size_t>(k)] * std::sin(xi * x[0]);
    }
    return v;
  });
  if (nonneg)
    for (auto& v : f.values()) v = v * v;
  return f;
}

} // namespace

std::string CheckOpsReport::json() const {
  nlohmann::json doc = {{"schema_version", kSchemaVersion},
                        {"kind", "check_ops"},
                        {"all_passed", all_passed}};
  doc["checks"] = nlohmann::json::array();
  for (const auto& c : checks) doc["checks"].push_back(check_to_json(c));
  return doc.dump(2) + "\n";
}

CheckOpsReport check_ops() {
  CheckOpsReport report;
  auto add = [&](std::string name, double slack, double tol) {
    const bool pass = slack >= -tol;
    report.checks.push_back({std::move(name), pass, true, slack, tol});
    if (!pass) report.all_passed = false;
  };

  // 1. eigenfunction exactness on single harmonics
  {
    auto g = Grid::make(1, 16.0, 64);
    double worst = 0.0;
    for (int k : {1, 3, 9, 17}) {
      const double q = std::abs(g->frequency(k));
      for (double s : {0.25, 0.5, 0.75}) {
        Field h = harmonic(g, k, false);
        Field out = apply_frac_laplacian(h, s);
        const double lambda = std::pow(q, 2.0 * s);
        for (std::size_t i = 0; i < out.size(); ++i)
          worst = std::max(worst, std::abs(out[i] - lambda * h[i]) / lambda);
        Field sh = harmonic(g, k, true);
        Field grad = apply_nonlocal_gradient(sh, s, 0);
        const double glam = std::pow(q, 1.0 - 2.0 * s);
        Field gexp = harmonic(g, k, false);
        for (std::size_t i = 0; i < grad.size(); ++i)
          worst = std::max(worst, std::abs(grad[i] - glam * gexp[i]) / glam);
      }
      // inverse at s < 1/2 in 1D
      Field h = harmonic(g, k, false);
      Field inv = apply_inverse_frac_laplacian(h, 0.3);
      const double ilam = std::pow(q, -0.6);
      for (std::size_t i = 0; i < inv.size(); ++i)
        worst = std::max(worst, std::abs(inv[i] - ilam * h[i]) / ilam);
    }
    // 2D spot check
    auto g2 = Grid::make(2, 8.0, 16);
    const double xi0 = g2->frequency(2), xi1 = g2->frequency(3);
    Field h2 = Field::sample(g2, [&](const double* x) {
      return std::cos(xi0 * x[0] + xi1 * x[1]);
    });
    const double q2 = std::hypot(xi0, xi1);
    Field out2 = apply_frac_laplacian(h2, 0.6);
    const double lam2 = std::pow(q2, 1.2);
    for (std::size_t i = 0; i < out2.size(); ++i)
      worst = std::max(worst, std::abs(out2[i] - lam2 * h2[i]) / lam2);
    add("eigenfunction_exactness", -worst, 1e-12);
  }

  // 2.-4. symbol tables over the (s, eps) matrix on the acceptance grid
  {
    auto g = Grid::make(1, 16.0, 512);
    const std::vector<double> eps_set = {0.5, 0.1, 0.02};
    for (double s : {0.25, 0.5, 0.75}) {
      std::vector<SymbolTable> tables;
      for (double eps : eps_set) tables.push_back(regularized_symbol(*g, s, eps));

      double worst_dom = std::numeric_limits<double>::infinity();
      double worst_mono = std::numeric_limits<double>::infinity();
      for (std::size_t k = 1; k < g->node_count(); ++k) {
        const double cap = std::pow(g->mode_magnitude(k), 2.0 * s);
        for (const auto& tab : tables) {
          worst_dom = std::min(worst_dom, tab.values[k] / cap);
          worst_dom = std::min(worst_dom, (cap - tab.values[k]) / cap);
        }
        // smaller eps larger symbol
        worst_mono = std::min(worst_mono, (tables[1].values[k] - tables[0].values[k]) / cap);
        worst_mono = std::min(worst_mono, (tables[2].values[k] - tables[1].values[k]) / cap);
      }
      add("symbol_domination_s" + format_g(s), worst_dom, 0.0);
      add("symbol_eps_monotonicity_s" + format_g(s), worst_mono, 1e-11);

      // eps-convergence on the unit Gaussian
      Field u = Field::sample(g, [](const double* x) {
        return std::exp(-0.5 * x[0] * x[0]) / std::sqrt(2.0 * std::numbers::pi);
      });
      Field exact = apply_frac_laplacian(u, s);
      std::vector<double> errs;
      for (const auto& tab : tables) {
        std::vector<std::complex<double>> mult(tab.values.size());
        for (std::size_t k = 0; k < mult.size(); ++k) mult[k] = {tab.values[k], 0.0};
        Field approx(g, g->apply_multiplier(u.values(), mult));
        double err = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i)
          err = std::max(err, std::abs(approx[i] - exact[i]));
        errs.push_back(err);
      }
      double worst_drop = std::numeric_limits<double>::infinity();
      for (std::size_t j = 1; j < errs.size(); ++j)
        worst_drop = std::min(worst_drop, errs[j - 1] - errs[j]);
      add("eps_convergence_monotone_s" + format_g(s), worst_drop, 1e-12);
      // the 1e-3 absolute threshold at eps = 0.02 holds in the slow-order
      // regime; asserted at s = 0.25, reported for the other orders
      const bool asserted = s == 0.25;
      report.checks.push_back({"eps_convergence_linf_s" + format_g(s),
                               !asserted || errs.back() < 1e-3, asserted, -errs.back(), 1e-3});
      if (asserted && !(errs.back() < 1e-3)) report.all_passed = false;
    }
  }

  // 5. square-root identity, symmetry, positivity of the quadratic form
  {
    auto g = Grid::make(1, 16.0, 128);
    FracOperatorSpec spec;
    spec.s = 0.5;
    spec.epsilon = 0.25;
    spec.mode = OperatorMode::regularized_symbol;
    RegularizedOperator op(g, spec);
    double worst_sqrt = 0.0, worst_sym = 0.0, worst_pos = std::numeric_limits<double>::infinity();
    for (unsigned seed = 0; seed < 100; ++seed) {
      Field u = smooth_random(g, seed, false);
      Field v = smooth_random(g, 7000 + seed, false);
      const double lhs = inner_product(u, op.apply(u));
      Field root = op.apply_sqrt(u);
      const double rhs = inner_product(root, root);
      worst_sqrt = std::max(worst_sqrt, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-30));
      const double uv = inner_product(v, op.apply(u));
      const double vu = inner_product(u, op.apply(v));
      worst_sym = std::max(worst_sym, std::abs(uv - vu) / std::max(std::abs(uv), 1e-30));
      worst_pos = std::min(worst_pos, lhs / std::max(inner_product(u, u), 1e-30));
      Field w = apply_frac_laplacian(u, 0.5);
      worst_pos = std::min(worst_pos, inner_product(u, w) / std::max(inner_product(u, u), 1e-30));
    }
    add("square_root_identity", -worst_sqrt, 1e-10);
    add("operator_symmetry", -worst_sym, 1e-10);
    add("quadratic_form_positivity", worst_pos, 1e-12);
  }

  // 6. generalized Stroock-Varopoulos on nonnegative fields
  {
    auto g = Grid::make(1, 12.0, 64);
    FracOperatorSpec spec;
    spec.s = 0.5;
    spec.epsilon = 0.25;
    spec.mode = OperatorMode::regularized_kernel;
    RegularizedOperator op(g, spec);
    double worst = std::numeric_limits<double>::infinity();
    for (unsigned seed = 0; seed < 100; ++seed) {
      Field u = smooth_random(g, 500 + seed, true);
      const double scale = std::abs(inner_product(u, op.apply(u))) + 1e-30;
      for (double q : {2.0, 3.0, 4.0})
        worst = std::min(worst, stroock_varopoulos_check(u, q, op) / scale);
    }
    add("stroock_varopoulos", worst, 1e-10);
  }

  return report;
}

// ---------------------------------------------------------------------------
// Sweep.
// ---------------------------------------------------------------------------

SweepSpec SweepSpec::from_file(const std::string& path) {
  ConfigTree tree = ConfigTree::parse_file(path);
  SweepSpec spec;
  spec.base_config_path = tree.get_string("sweep.base", "");
  if (spec.base_config_path.empty())
    throw ConfigError("sweep: missing sweep.base config path");
  // base path relative to the spec file
  fs::path base(spec.base_config_path);
  if (base.is_relative()) {
    spec.base_config_path = (fs::path(path).parent_path() / base).string();
  }
  spec.jobs = tree.get_int("sweep.jobs", 1);
  spec.output_dir = tree.get_string("sweep.output_dir", "sweep");
  for (const auto& [key, value] : tree.values()) {
    if (key.rfind("axes.", 0) == 0) {
      const std::string axis = key.substr(5);
      spec.axes[axis] = tree.get_numbers(key, {});
      if (spec.axes[axis].empty())
        throw ConfigError("sweep: axis '" + axis + "' has no values");
    }
  }
  tree.reject_unconsumed();
  if (spec.axes.empty()) throw ConfigError("sweep: no axes given");
  if (spec.jobs < 1) throw ConfigError("sweep: jobs must be >= 1");
  return spec;
}

SweepResult sweep(const std::string& spec_path, int jobs_override) {
  SweepSpec spec = SweepSpec::from_file(spec_path);
  if (jobs_override > 0) spec.jobs = jobs_override;

  SweepResult result;
  result.output_dir = resolve_output_dir(spec.output_dir);
  fs::create_directories(result.output_dir);

  // cartesian product, axes in sorted key order
  std::vector<std::string> keys;
  for (const auto& [key, values] : spec.axes) keys.push_back(key);
  std::size_t total = 1;
  for (const auto& [key, values] : spec.axes) total *= values.size();

  result.rows.resize(total);
  std::atomic<std::size_t> cursor{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t run_index = cursor.fetch_add(1);
      if (run_index >= total) return;
      // decode the odometer
      std::map<std::string, double> assignment;
      std::size_t rem = run_index;
      for (const auto& key : keys) {
        const auto& values = spec.axes.at(key);
        assignment[key] = values[rem % values.size()];
        rem /= values.size();
      }
      char dir_name[32];
      std::snprintf(dir_name, sizeof(dir_name), "run_%04zu", run_index);
      const std::string run_dir = (fs::path(result.output_dir) / dir_name).string();

      std::string overrides;
      for (const auto& [key, value] : assignment)
        overrides += key + "=" + format_g(value) + "\n";
      overrides += "output.dir=\"" + run_dir + "\"\n";

      SweepRunRow row;
      row.dir = run_dir;
      row.axis_values = assignment;
      try {
        ScenarioResult sr = run_scenario(spec.base_config_path, overrides);
        row.exit_status = sr.exit_status;
        row.checks = sr.checks;
        row.m = sr.m;
        row.s = sr.s;
        row.epsilon = sr.epsilon;
        row.delta = sr.delta;
        row.mu = sr.mu;
        row.support_radius = sr.support_radius_end;
        row.tail_min = sr.tail_min_end;
        if (sr.smoothing) row.gamma_hat = sr.smoothing->gamma_hat;
        row.gamma_theory = sr.smoothing ? sr.smoothing->gamma_theory : 0.0;
      } catch (const ConfigError&) {
        row.exit_status = 2;
      } catch (const std::exception&) {
        row.exit_status = 3;
      }
      result.rows[run_index] = std::move(row);
    }
  };

  std::vector<std::thread> pool;
  const int nthreads = std::min<std::size_t>(spec.jobs, total);
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  for (const auto& row : result.rows)
    if (row.exit_status != 0) result.exit_status = 1;

  // union of check names for the summary columns
  std::vector<std::string> check_names;
  for (const auto& row : result.rows)
    for (const auto& c : row.checks)
      if (std::find(check_names.begin(), check_names.end(), c.name) == check_names.end())
        check_names.push_back(c.name);
  std::sort(check_names.begin(), check_names.end());

  std::ofstream csv(fs::path(result.output_dir) / "summary.csv", std::ios::trunc);
  csv << "run,dir";
  for (const auto& key : keys) csv << "," << key;
  csv << ",m,s,epsilon,delta,mu,gamma_hat,gamma_theory,support_radius,tail_min,status";
  for (const auto& name : check_names) csv << "," << name;
  csv << "\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& row = result.rows[i];
    csv << i << "," << row.dir;
    for (const auto& key : keys) csv << "," << format_g(row.axis_values.at(key));
    csv << "," << format_g(row.m) << "," << format_g(row.s) << "," << format_g(row.epsilon)
        << "," << format_g(row.delta) << "," << format_g(row.mu) << ","
        << format_g(row.gamma_hat) << "," << format_g(row.gamma_theory) << ","
        << format_g(row.support_radius) << "," << format_g(row.tail_min) << ","
        << row.exit_status;
    for (const auto& name : check_names) {
      const auto it = std::find_if(row.checks.begin(), row.checks.end(),
                                   [&](const CheckResult& c) { return c.name == name; });
      csv << "," << (it == row.checks.end() ? "" : (it->pass ? "1" : "0"));
    }
    csv << "\n";
  }
  return result;
}

// ---------------------------------------------------------------------------
// Consolidated report.
// ---------------------------------------------------------------------------

int emit_report(const std::string& artifact_dir, const std::string& out_base) {
  if (!fs::exists(artifact_dir)) throw ConfigError("report: no such directory " + artifact_dir);
  std::vector<std::string> report_files;
  std::vector<std::string> missing;
  std::vector<std::string> ledger_dirs;
  for (const auto& entry : fs::recursive_directory_iterator(artifact_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name == "report.json") report_files.push_back(entry.path().string());
    if (name == "ledger.csv") ledger_dirs.push_back(entry.path().parent_path().string());
  }
  std::sort(report_files.begin(), report_files.end());
  std::sort(ledger_dirs.begin(), ledger_dirs.end());
  for (const auto& dir : ledger_dirs)
    if (!fs::exists(fs::path(dir) / "report.json")) missing.push_back(dir + "/report.json");

  nlohmann::json doc = {{"schema_version", kSchemaVersion},
                        {"kind", "consolidated"},
                        {"root", artifact_dir}};
  doc["runs"] = nlohmann::json::array();
  doc["missing"] = missing;
  bool any_fail = !missing.empty();
  std::vector<std::array<std::string, 5>> csv_rows;
  for (const auto& file : report_files) {
    std::ifstream in(file);
    nlohmann::json run;
    try {
      run = nlohmann::json::parse(in);
    } catch (const std::exception&) {
      missing.push_back(file + " (unparseable)");
      any_fail = true;
      continue;
    }
    const std::string dir = fs::path(file).parent_path().string();
    run["dir"] = dir;
    if (run.value("exit_status", 0) != 0) any_fail = true;
    for (const auto& c : run.value("checks", nlohmann::json::array())) {
      csv_rows.push_back({dir, c.value("name", ""), c.value("pass", false) ? "1" : "0",
                          format_g(c.value("slack", 0.0)), format_g(c.value("tol", 0.0))});
    }
    doc["runs"].push_back(std::move(run));
  }
  doc["missing"] = missing;
  doc["overall_pass"] = !any_fail;

  const std::string base =
      out_base.empty() ? (fs::path(artifact_dir) / "consolidated").string() : out_base;
  {
    std::ofstream out(base + ".json", std::ios::trunc);
    out << doc.dump(2) << "\n";
  }
  {
    std::ofstream csv(base + ".csv", std::ios::trunc);
    csv << "dir,check,pass,slack,tol\n";
    for (const auto& row : csv_rows)
      csv << row[0] << "," << row[1] << "," << row[2] << "," << row[3] << "," << row[4] << "\n";
  }
  return any_fail ? 1 : 0;
}

} // namespace nlpme
