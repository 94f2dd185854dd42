#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "stepper.hpp"

using namespace nlpme;

namespace {

SolverConfig direct_config(double s, double m, double cfl = 0.5, double dt_max = 1e-2) {
  SolverConfig cfg;
  cfg.s = s;
  cfg.nonlinearity = {MobilityKind::power, m, 0.0};
  cfg.cfl_safety = cfl;
  cfg.dt_max = dt_max;
  return cfg;
}

double linf_diff(const Field& a, const Field& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// exact multiplier solution of the m = 1 limit u_t = -(-Delta)^{1-s} u
Field fractional_heat_exact(const Field& u0, double s, double t) {
  const Grid& g = u0.grid();
  auto spec = g.transform(u0.values());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double q = g.mode_magnitude(k);
    spec[k] *= std::exp(-t * std::pow(q, 2.0 - 2.0 * s));
  }
  return Field(u0.grid_ptr(), g.inverse_transform(spec));
}

} // namespace

TEST_CASE("velocity: constant field gives zero, single harmonic exact at faces") {
  auto g = Grid::make(1, 16.0, 128);
  Stepper st(g, direct_config(0.3, 2.0));

  Field c(g);
  for (auto& v : c.values()) v = 2.0;
  auto vc = st.velocity(c);
  REQUIRE(vc.size() == 1);
  for (double v : vc[0].values()) CHECK(std::abs(v) < 1e-13);

  const double xi = g->frequency(3);
  Field h = Field::sample(g, [&](const double* x) { return std::sin(xi * x[0]); });
  auto faces = st.face_velocity(h);
  // grad (-Delta)^{-s} sin(xi x) = |xi|^{1-2s} cos(xi x), sampled at x + dx/2
  const double lambda = std::pow(std::abs(xi), 1.0 - 2.0 * 0.3);
  for (int i = 0; i < g->points_per_axis(); ++i) {
    const double expected = lambda * std::cos(xi * (g->coordinate(i) + 0.5 * g->dx()));
    CHECK(faces[0][static_cast<std::size_t>(i)] ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("velocity: regularized mode approaches the exact mode as eps -> 0") {
  auto g = Grid::make(1, 16.0, 256);
  Field u = Field::sample(g, [](const double* x) { return oracle::gaussian(x, 1, 1.0, 1.0); });
  Stepper exact(g, direct_config(0.4, 2.0));
  auto v_exact = exact.velocity(u);
  double prev = 1e300;
  for (double eps : {0.4, 0.2, 0.1, 0.05}) {
    SolverConfig cfg = direct_config(0.4, 2.0);
    cfg.epsilon = eps;
    cfg.operator_mode = OperatorMode::regularized_symbol;
    Stepper reg(g, cfg);
    const double err = linf_diff(reg.velocity(u)[0], v_exact[0]);
    CHECK(err < prev);
    prev = err;
  }
  // the symbol gap closes like eps^{2s}
  CHECK(prev < 2.0 * std::pow(0.05, 0.8));
}

TEST_CASE("explicit step: uniform field unchanged, mass exact on random data") {
  auto g = Grid::make(1, 12.0, 128);
  Stepper st(g, direct_config(0.5, 2.0));

  Field c(g);
  for (auto& v : c.values()) v = 1.5;
  auto out = st.explicit_step(c, 1e-3);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(out[i] == doctest::Approx(1.5).epsilon(1e-14));

  for (unsigned seed : {10u, 20u, 30u}) {
    Field u(g, oracle::random_smooth_field(128, 12.0, seed));
    const double dt = st.cfl_dt(u);
    auto next = st.explicit_step(u, dt);
    CHECK(mass(next) == doctest::Approx(mass(u)).epsilon(1e-13));
    // L-infinity does not increase for the monotone upwind update
    CHECK(lp_norm(next, kInfinity) <= lp_norm(u, kInfinity) + 1e-10);
  }
}

TEST_CASE("cfl_dt: zero field gives dt_max, halves with doubled velocity scale") {
  auto g = Grid::make(1, 12.0, 128);
  Stepper st(g, direct_config(0.5, 2.0, 0.5, 0.125));
  Field zero(g);
  CHECK(st.cfl_dt(zero) == doctest::Approx(0.125));

  Field u(g, oracle::random_smooth_field(128, 12.0, 77));
  // scaling u by 2 doubles max|v| and doubles max G' (m = 2): dt drops 4x
  Field u2(g);
  for (std::size_t i = 0; i < u.size(); ++i) u2[i] = 2.0 * u[i];
  SolverConfig tight = direct_config(0.5, 2.0, 0.5, 1e6);
  Stepper st2(g, tight);
  CHECK(st2.cfl_dt(u2) == doctest::Approx(0.25 * st2.cfl_dt(u)).epsilon(1e-10));
}

TEST_CASE("positivity under the CFL rule on random nonnegative fields") {
  auto g = Grid::make(1, 12.0, 128);
  for (double m : {1.5, 2.0, 3.0}) {
    Stepper st(g, direct_config(0.5, m));
    for (unsigned seed = 0; seed < 100; ++seed) {
      Field u(g, oracle::random_smooth_field(128, 12.0, seed));
      const double dt = st.cfl_dt(u);
      Stepper::StepStats stats;
      Field next = st.explicit_step(u, dt, &stats);
      for (double v : next.values()) CHECK(v >= 0.0);
    }
  }
}

TEST_CASE("explicit m=1 run matches the exact fractional-heat multiplier solution") {
  auto g = Grid::make(1, 16.0, 256);
  Field u0 = Field::sample(g, [](const double* x) { return oracle::gaussian(x, 1, 1.0, 1.0); });
  SolverConfig cfg = direct_config(0.5, 1.0, 0.5, 2e-3);
  cfg.t_end = 0.5;
  ObserverConfig obs;
  obs.cadence = 0.1;
  auto result = run(u0, cfg, obs, LedgerConfig{});
  REQUIRE_FALSE(result.aborted);
  const Field& numeric = result.trajectory.samples.back().field;
  Field exact = fractional_heat_exact(u0, 0.5, 0.5);
  CHECK(linf_diff(numeric, exact) < 1e-3);
}

TEST_CASE("semi-implicit: delta=0 identical to explicit; viscous part matches semigroup at O(dt^2)") {
  auto g = Grid::make(1, 12.0, 128);
  Field u(g, oracle::random_smooth_field(128, 12.0, 5));

  Stepper st0(g, direct_config(0.5, 2.0));
  const double dt0 = st0.cfl_dt(u);
  auto a = st0.explicit_step(u, dt0);
  auto b = st0.semi_implicit_step(u, dt0);
  CHECK(linf_diff(a, b) == 0.0);

  // identical advective part, so semi_implicit = viscous divide of the
  // delta-free explicit state; compare that divide against the semigroup
  SolverConfig cfg = direct_config(0.5, 2.0);
  cfg.delta = 0.3;
  cfg.scheme = Scheme::semi_implicit;
  Stepper st(g, cfg);
  Field bump = Field::sample(g, [](const double* x) { return oracle::gaussian(x, 1, 1.0, 1.5); });

  auto viscous_error = [&](double dt) {
    Field advected = st0.explicit_step(bump, dt);
    Field stepped = st.semi_implicit_step(bump, dt);
    Field semigroup = apply_heat_semigroup(advected, cfg.delta, dt);
    CHECK(mass(stepped) == doctest::Approx(mass(bump)).epsilon(1e-13));
    return linf_diff(stepped, semigroup);
  };
  const double e1 = viscous_error(1e-3);
  const double e2 = viscous_error(5e-4);
  CHECK(e1 < 1e-5);
  CHECK(e2 < e1 / 3.0); // second order in dt
}

TEST_CASE("run: t_end=0 returns the initial state; cadence row count") {
  auto g = Grid::make(1, 12.0, 64);
  Field u0 = Field::sample(g, [](const double* x) { return oracle::gaussian(x, 1, 1.0, 1.5); });
  SolverConfig cfg = direct_config(0.5, 2.0);
  cfg.t_end = 0.0;
  auto r0 = run(u0, cfg, ObserverConfig{}, LedgerConfig{});
  CHECK(r0.trajectory.samples.size() == 1);
  CHECK(r0.ledger.rows().size() == 1);

  cfg.t_end = 1.0;
  ObserverConfig obs;
  obs.cadence = 0.1;
  auto r1 = run(u0, cfg, obs, LedgerConfig{});
  REQUIRE_FALSE(r1.aborted);
  CHECK(r1.ledger.rows().size() == 11);
  // mass column constant, linf nonincreasing
  const auto& rows = r1.ledger.rows();
  for (const auto& row : rows) {
    CHECK(row.mass == doctest::Approx(rows.front().mass).epsilon(1e-10));
  }
  for (std::size_t k = 1; k < rows.size(); ++k)
    CHECK(rows[k].linf <= rows[k - 1].linf + 1e-10);
}

TEST_CASE("run determinism: identical config gives identical ledger bytes") {
  auto g = Grid::make(1, 12.0, 64);
  Field u0 = Field::sample(g, [](const double* x) { return oracle::gaussian(x, 1, 1.0, 1.5); });
  SolverConfig cfg = direct_config(0.5, 2.0);
  cfg.t_end = 0.3;
  ObserverConfig obs;
  obs.cadence = 0.1;
  std::ostringstream a, b;
  run(u0, cfg, obs, LedgerConfig{}).ledger.write_csv(a);
  run(u0, cfg, obs, LedgerConfig{}).ledger.write_csv(b);
  CHECK(a.str() == b.str());
}

TEST_CASE("duhamel: frozen mobility reproduces the heat semigroup") {
  auto g = Grid::make(1, 12.0, 64);
  Field u0 = Field::sample(g, [](const double* x) { return oracle::gaussian(x, 1, 1.0, 1.5); });
  SolverConfig cfg;
  cfg.s = 0.5;
  cfg.epsilon = 0.25;
  cfg.operator_mode = OperatorMode::regularized_symbol;
  cfg.delta = 0.1;
  cfg.nonlinearity = {MobilityKind::shifted_power, 2.0, 0.5};
  cfg.scheme = Scheme::duhamel;
  cfg.duhamel_freeze_mobility = true;
  DuhamelReport rep;
  Trajectory traj = duhamel_solve(u0, cfg, 0.05, 1e-10, 10, &rep);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 2); // constant map: fixed in one sweep
  const Field& end = traj.samples.back().field;
  Field expected = apply_heat_semigroup(u0, 0.1, 0.05);
  CHECK(linf_diff(end, expected) < 1e-10);
}

TEST_CASE("duhamel: zero datum is the zero fixed point") {
  auto g = Grid::make(1, 12.0, 64);
  Field zero(g);
  SolverConfig cfg;
  cfg.s = 0.5;
  cfg.epsilon = 0.25;
  cfg.operator_mode = OperatorMode::regularized_symbol;
  cfg.delta = 0.1;
  cfg.nonlinearity = {MobilityKind::shifted_power, 2.0, 0.5};
  cfg.scheme = Scheme::duhamel;
  DuhamelReport rep;
  Trajectory traj = duhamel_solve(zero, cfg, 0.05, 1e-12, 5, &rep);
  CHECK(rep.converged);
  for (const auto& s : traj.samples)
    for (double v : s.field.values()) CHECK(v == 0.0);
}

TEST_CASE("duhamel: contraction and cross-scheme agreement (acceptance pilot)") {
  auto g = Grid::make(1, 16.0, 128);
  Field u0 = Field::sample(g, [](const double* x) { return oracle::gaussian(x, 1, 1.0, 1.0); });
  SolverConfig cfg;
  cfg.s = 0.5;
  cfg.epsilon = 0.25;
  cfg.operator_mode = OperatorMode::regularized_symbol;
  cfg.delta = 0.1;
  cfg.nonlinearity = {MobilityKind::shifted_power, 2.0, 0.5};
  cfg.scheme = Scheme::duhamel;
  DuhamelReport rep;
  Trajectory traj = duhamel_solve(u0, cfg, 0.05, 1e-9, 40, &rep);
  CHECK(rep.converged);
  for (std::size_t k = 1; k + 1 < rep.distances.size(); ++k)
    CHECK(rep.distances[k + 1] < rep.distances[k]);

  // the same regularized problem advanced by the semi-implicit scheme
  SolverConfig si = cfg;
  si.scheme = Scheme::semi_implicit;
  si.t_end = 0.05;
  si.dt_max = 2e-4;
  ObserverConfig obs;
  obs.cadence = 0.05;
  auto result = run(u0, si, obs, LedgerConfig{});
  REQUIRE_FALSE(result.aborted);
  CHECK(linf_diff(result.trajectory.samples.back().field, traj.samples.back().field) < 1e-3);
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.scheme = Scheme::duhamel;
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.scheme = Scheme::explicit_upwind;
  cfg.cfl_safety = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.cfl_safety = 0.5;
  cfg.epsilon = 0.1;
  cfg.operator_mode = OperatorMode::exact_symbol;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.operator_mode = OperatorMode::regularized_symbol;
  CHECK_NOTHROW(cfg.validate());
}
