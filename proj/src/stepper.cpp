#include "stepper.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace nlpme {

namespace {

constexpr double kClampTolerance = 1e-14;

// Periodic neighbor in +1 direction along `axis` of a flat index.
inline std::size_t shift_up(const Grid& g, std::size_t flat, int axis) {
  const std::size_t n = static_cast<std::size_t>(g.points_per_axis());
  if (g.dim() == 1) return (flat + 1) % n;
  const std::size_t i0 = flat / n, i1 = flat % n;
  if (axis == 0) return ((i0 + 1) % n) * n + i1;
  return i0 * n + (i1 + 1) % n;
}

inline std::size_t shift_down(const Grid& g, std::size_t flat, int axis) {
  const std::size_t n = static_cast<std::size_t>(g.points_per_axis());
  if (g.dim() == 1) return (flat + n - 1) % n;
  const std::size_t i0 = flat / n, i1 = flat % n;
  if (axis == 0) return ((i0 + n - 1) % n) * n + i1;
  return i0 * n + (i1 + n - 1) % n;
}

} // namespace

void SolverConfig::validate() const {
  nonlinearity.validate();
  if (!(s > 0.0) || !(s < 1.0)) throw std::invalid_argument("solver: s must lie in (0,1)");
  if (epsilon < 0.0) throw std::invalid_argument("solver: epsilon must be >= 0");
  if (delta < 0.0) throw std::invalid_argument("solver: delta must be >= 0");
  if (t_end < 0.0) throw std::invalid_argument("solver: t_end must be >= 0");
  if (!(cfl_safety > 0.0) || cfl_safety > 1.0)
    throw std::invalid_argument("solver: cfl_safety must lie in (0,1]");
  if (!(dt_max > 0.0)) throw std::invalid_argument("solver: dt_max must be > 0");
  if (epsilon == 0.0 && operator_mode != OperatorMode::exact_symbol)
    throw std::invalid_argument("solver: regularized operator mode requires epsilon > 0");
  if (epsilon > 0.0 && operator_mode == OperatorMode::exact_symbol)
    throw std::invalid_argument("solver: epsilon > 0 requires a regularized operator mode");
  if (scheme == Scheme::duhamel) {
    if (!(epsilon > 0.0))
      throw std::invalid_argument("solver: the Duhamel map is built on L_eps; epsilon > 0 required");
    if (!(duhamel_window > 0.0) || !(duhamel_tol > 0.0) || duhamel_max_iter < 1 ||
        duhamel_nodes < 4)
      throw std::invalid_argument("solver: invalid Duhamel controls");
  }
  if (positivity_floor != 0.0)
    throw std::invalid_argument("solver: positivity_floor is fixed at 0");
}

void Trajectory::append(double t, Field field) {
  if (!samples.empty() && !(t > samples.back().t))
    throw std::invalid_argument("trajectory: times must increase strictly");
  samples.push_back({t, std::move(field)});
}

Stepper::Stepper(GridPtr grid, SolverConfig config)
    : grid_(std::move(grid)), config_(std::move(config)) {
  config_.validate();
  const Grid& g = *grid_;
  const int dim = g.dim();

  // Pressure-gradient multiplier P(|xi|): |xi|^{-2s} exact, or the order
  // (1-s) regularized symbol divided by |xi|^2.
  std::vector<double> radial(g.node_count(), 0.0);
  if (config_.epsilon == 0.0) {
    g.for_each_mode([&](std::size_t flat, const double*) {
      const double q = g.mode_magnitude(flat);
      radial[flat] = q == 0.0 ? 0.0 : std::pow(q, -2.0 * config_.s);
    });
  } else {
    FracOperatorSpec vspec;
    vspec.s = 1.0 - config_.s;
    vspec.epsilon = config_.epsilon;
    vspec.mode = config_.operator_mode;
    RegularizedOperator reg(grid_, vspec);
    g.for_each_mode([&](std::size_t flat, const double*) {
      const double q = g.mode_magnitude(flat);
      radial[flat] = q == 0.0 ? 0.0 : reg.symbol().values[flat] / (q * q);
    });
  }

  center_mult_.resize(static_cast<std::size_t>(dim));
  face_mult_.resize(static_cast<std::size_t>(dim));
  xi_sq_.assign(g.node_count(), 0.0);
  g.for_each_mode([&](std::size_t flat, const double* xi) {
    const double q = g.mode_magnitude(flat);
    xi_sq_[flat] = q * q;
    (void)xi;
  });

  for (int axis = 0; axis < dim; ++axis) {
    auto& center = center_mult_[static_cast<std::size_t>(axis)];
    auto& face = face_mult_[static_cast<std::size_t>(axis)];
    center.assign(g.node_count(), {0.0, 0.0});
    face.assign(g.node_count(), {0.0, 0.0});
    const double half = 0.5 * g.dx();
    g.for_each_mode([&](std::size_t flat, const double* xi) {
      if (g.mode_on_nyquist(flat, axis)) return; // odd symbol: drop Nyquist
      const std::complex<double> base(0.0, xi[axis] * radial[flat]);
      center[flat] = base;
      face[flat] = base * std::exp(std::complex<double>(0.0, xi[axis] * half));
    });
  }
}

std::vector<Field> Stepper::velocity(const Field& u) const {
  std::vector<Field> out;
  out.reserve(center_mult_.size());
  for (const auto& mult : center_mult_)
    out.emplace_back(grid_, grid_->apply_multiplier(u.values(), mult));
  return out;
}

std::vector<Field> Stepper::face_velocity(const Field& u) const {
  std::vector<Field> out;
  out.reserve(face_mult_.size());
  for (const auto& mult : face_mult_)
    out.emplace_back(grid_, grid_->apply_multiplier(u.values(), mult));
  return out;
}

double Stepper::cfl_dt(const Field& u) const {
  const auto faces = face_velocity(u);
  double vmax = 0.0;
  for (const auto& f : faces)
    for (double v : f.values()) vmax = std::max(vmax, std::abs(v));
  double umax = 0.0;
  for (double v : u.values()) umax = std::max(umax, v);
  const double gmax = config_.nonlinearity.mobility_bound(umax);

  const double dim = static_cast<double>(grid_->dim());
  double dt = config_.dt_max;
  if (vmax * gmax > 0.0)
    dt = std::min(dt, config_.cfl_safety * grid_->dx() / (2.0 * dim * vmax * gmax));
  if (config_.scheme == Scheme::explicit_upwind && config_.delta > 0.0)
    dt = std::min(dt, config_.cfl_safety * grid_->dx() * grid_->dx() / (2.0 * dim * config_.delta));
  return std::min(dt, config_.dt_max);
}

Field Stepper::advect(const Field& u, double dt, bool fd_viscosity, StepStats* stats) const {
  const Grid& g = *grid_;
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");

  const auto faces = face_velocity(u);
  double vmax = 0.0;
  for (const auto& f : faces)
    for (double v : f.values()) vmax = std::max(vmax, std::abs(v));
  double umax = 0.0;
  for (double v : u.values()) umax = std::max(umax, v);
  const double gmax = config_.nonlinearity.mobility_bound(umax);
  const double dim = static_cast<double>(g.dim());
  if (vmax * gmax > 0.0 && dt > g.dx() / (2.0 * dim * vmax * gmax) * (1.0 + 1e-9))
    throw NumericalAbort("step: advective CFL violation");
  if (fd_viscosity && config_.delta > 0.0 &&
      dt > g.dx() * g.dx() / (2.0 * dim * config_.delta) * (1.0 + 1e-9))
    throw NumericalAbort("step: viscous CFL violation");

  // mobility table; transport velocity is minus the pressure gradient
  std::vector<double> gprime(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    gprime[i] = config_.nonlinearity.mobility(std::max(u[i], 0.0));

  const double lambda = dt / g.dx();

  // Donor-cell outflow cap for the degenerate mobility family. When
  // G'(0) = 0 the flux derivative (m-1) u^{m-2} |v| is unbounded as u -> 0
  // for m < 2, so no dt of the max-G' CFL form makes the raw upwind update
  // monotone in the deep tail; capping each cell's outflow at its content
  // restores positivity there, never triggers on resolved cells (for
  // m >= 2 the CFL bound already implies outflow < content), and keeps
  // the telescoped mass sum exact. Mobilities with G'(0) > 0 carry genuine
  // through-flow in empty cells and have bounded flux derivatives; they
  // are monotone under the CFL rule and must not be capped.
  const bool degenerate = config_.nonlinearity.mobility(0.0) == 0.0;
  std::vector<double> limiter(u.size(), 1.0);
  if (degenerate) {
    std::vector<double> outflow(u.size(), 0.0);
    for (int axis = 0; axis < g.dim(); ++axis) {
      const auto& w = faces[static_cast<std::size_t>(axis)];
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double a = -w[i]; // transport velocity on face (i+1/2)
        const std::size_t up = shift_up(g, i, axis);
        if (a >= 0.0)
          outflow[i] += lambda * gprime[i] * a;
        else
          outflow[up] += lambda * gprime[up] * (-a);
      }
    }
    for (std::size_t i = 0; i < u.size(); ++i)
      if (outflow[i] > std::max(u[i], 0.0))
        limiter[i] = std::max(u[i], 0.0) / outflow[i];
  }

  Field out(grid_, std::vector<double>(u.values().begin(), u.values().end()));
  for (int axis = 0; axis < g.dim(); ++axis) {
    const auto& w = faces[static_cast<std::size_t>(axis)];
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double a = -w[i];
      const std::size_t up = shift_up(g, i, axis);
      const double flux =
          a >= 0.0 ? limiter[i] * gprime[i] * a : limiter[up] * gprime[up] * a;
      out[i] -= lambda * flux;
      out[up] += lambda * flux;
    }
  }

  if (fd_viscosity && config_.delta > 0.0) {
    const double coef = dt * config_.delta / (g.dx() * g.dx());
    for (int axis = 0; axis < g.dim(); ++axis) {
      for (std::size_t i = 0; i < u.size(); ++i) {
        const std::size_t up = shift_up(g, i, axis);
        const std::size_t dn = shift_down(g, i, axis);
        out[i] += coef * (u[up] - 2.0 * u[i] + u[dn]);
      }
    }
  }

  double min_val = 0.0;
  long long clamped = 0;
  for (auto& v : out.values()) {
    if (v < 0.0) {
      min_val = std::min(min_val, v);
      if (v < -kClampTolerance)
        throw NumericalAbort("step: negativity beyond rounding; CFL or scheme bug");
      v = 0.0;
      ++clamped;
    }
  }
  if (stats) {
    stats->clamped += clamped;
    stats->min_before_clamp = std::min(stats->min_before_clamp, min_val);
  }
  return out;
}

Field Stepper::explicit_step(const Field& u, double dt, StepStats* stats) const {
  return advect(u, dt, /*fd_viscosity=*/true, stats);
}

Field Stepper::semi_implicit_step(const Field& u, double dt, StepStats* stats) const {
  Field advected = advect(u, dt, /*fd_viscosity=*/false, stats);
  if (config_.delta == 0.0) return advected;
  std::vector<std::complex<double>> divisor(grid_->node_count());
  for (std::size_t k = 0; k < divisor.size(); ++k)
    divisor[k] = std::complex<double>(1.0 / (1.0 + dt * config_.delta * xi_sq_[k]), 0.0);
  double scale = 0.0;
  for (double v : advected.values()) scale = std::max(scale, v);
  Field out(grid_, grid_->apply_multiplier(advected.values(), divisor));
  // The sampled divide symbol is not an exactly nonnegative discrete kernel:
  // it rings at ~1e-12 of the field scale where the state is near zero.
  // Clamping there would break exact mass conservation, so ringing-band
  // negatives are left in place (mobility and power evaluations clamp
  // pointwise downstream); anything larger is a genuine instability.
  const double tolerance = kClampTolerance + 1e-11 * scale;
  double min_val = 0.0;
  for (double v : out.values()) {
    if (v < -tolerance)
      throw NumericalAbort("semi-implicit step: negativity beyond the ringing band");
    min_val = std::min(min_val, v);
  }
  if (stats) stats->min_before_clamp = std::min(stats->min_before_clamp, min_val);
  return out;
}

Trajectory duhamel_solve(const Field& u0, const SolverConfig& config, double t_window,
                         double tol, int max_iter, DuhamelReport* report) {
  SolverConfig cfg = config;
  cfg.scheme = Scheme::duhamel;
  cfg.validate();
  if (!(t_window > 0.0) || !(tol > 0.0) || max_iter < 1)
    throw std::invalid_argument("duhamel: invalid window, tolerance, or iteration budget");

  const GridPtr grid = u0.grid_ptr();
  const Grid& g = *grid;
  const int nodes = cfg.duhamel_nodes;
  const double dtau = t_window / (nodes - 1);

  // Regularized velocity multiplier per axis (cell centered).
  Stepper machinery(grid, cfg);

  // Spectra of the heat-semigroup-propagated initial datum at each node.
  const auto u0_hat = g.transform(u0.values());
  std::vector<std::vector<std::complex<double>>> base_hat(
      static_cast<std::size_t>(nodes));
  std::vector<double> xi_sq(g.node_count());
  g.for_each_mode([&](std::size_t flat, const double*) {
    xi_sq[flat] = g.mode_magnitude(flat) * g.mode_magnitude(flat);
  });
  for (int j = 0; j < nodes; ++j) {
    auto& h = base_hat[static_cast<std::size_t>(j)];
    h.resize(g.node_count());
    const double tau = j * dtau;
    for (std::size_t k = 0; k < h.size(); ++k)
      h[k] = u0_hat[k] * std::exp(-cfg.delta * tau * xi_sq[k]);
  }

  std::vector<Field> v;
  v.reserve(static_cast<std::size_t>(nodes));
  for (int j = 0; j < nodes; ++j)
    v.emplace_back(grid, g.inverse_transform(base_hat[static_cast<std::size_t>(j)]));

  DuhamelReport local_report;
  DuhamelReport& rep = report ? *report : local_report;
  rep = DuhamelReport{};

  int worsening = 0;
  for (int iter = 0; iter < max_iter; ++iter) {
    // spectra of G(v) = G'(v) * velocity(v), per node and axis
    std::vector<std::vector<std::vector<std::complex<double>>>> g_hat(
        static_cast<std::size_t>(nodes));
    for (int j = 0; j < nodes; ++j) {
      const Field& vj = v[static_cast<std::size_t>(j)];
      const auto w = machinery.velocity(vj);
      auto& per_axis = g_hat[static_cast<std::size_t>(j)];
      per_axis.reserve(w.size());
      for (const auto& wa : w) {
        Field ga(grid);
        if (!cfg.duhamel_freeze_mobility) {
          for (std::size_t i = 0; i < ga.size(); ++i)
            ga[i] = cfg.nonlinearity.mobility(std::max(vj[i], 0.0)) * wa[i];
        }
        per_axis.push_back(g.transform(ga.values()));
      }
    }

    double dist = 0.0;
    std::vector<Field> next;
    next.reserve(v.size());
    for (int j = 0; j < nodes; ++j) {
      std::vector<std::complex<double>> acc = base_hat[static_cast<std::size_t>(j)];
      for (int k = 0; k <= j; ++k) {
        const double weight = (k == 0 || k == j) ? 0.5 * dtau : dtau;
        if (j == 0) break;
        const double lag = (j - k) * dtau;
        const auto& slices = g_hat[static_cast<std::size_t>(k)];
        g.for_each_mode([&](std::size_t f, const double* xi) {
          const double damp = std::exp(-cfg.delta * lag * xi_sq[f]);
          std::complex<double> div(0.0, 0.0);
          for (int axis = 0; axis < g.dim(); ++axis)
            div += std::complex<double>(0.0, xi[axis]) * slices[static_cast<std::size_t>(axis)][f];
          acc[f] += weight * damp * div;
        });
      }
      Field nj(grid, g.inverse_transform(acc));
      double d = 0.0;
      const Field& old = v[static_cast<std::size_t>(j)];
      for (std::size_t i = 0; i < nj.size(); ++i) {
        const double diff = nj[i] - old[i];
        d += diff * diff;
      }
      dist = std::max(dist, std::sqrt(d * g.cell_volume()));
      next.push_back(std::move(nj));
    }
    v = std::move(next);
    rep.iterations = iter + 1;
    if (!rep.distances.empty()) {
      if (dist >= rep.distances.back()) {
        if (++worsening >= 3)
          throw NumericalAbort(
              "duhamel: successive distances not contracting; shrink the window");
      } else {
        worsening = 0;
      }
    }
    rep.distances.push_back(dist);
    if (dist < tol) {
      rep.converged = true;
      break;
    }
  }
  if (!rep.converged && !(rep.distances.back() < tol))
    throw NumericalAbort("duhamel: no fixed point within the iteration budget");

  Trajectory traj;
  for (int j = 0; j < nodes; ++j) {
    traj.samples.push_back({j * dtau, std::move(v[static_cast<std::size_t>(j)])});
    if (j > 0) traj.dt_history.push_back(dtau);
  }
  return traj;
}

RunResult run(const Field& u0, const SolverConfig& config, const ObserverConfig& observer,
              LedgerConfig ledger_config) {
  config.validate();
  const GridPtr grid = u0.grid_ptr();

  Stepper stepper(grid, config);
  ledger_config.s = config.s;
  ledger_config.nonlinearity = config.nonlinearity;
  if (!ledger_config.velocity)
    ledger_config.velocity = [&stepper](const Field& f) { return stepper.velocity(f); };

  RunResult result{Trajectory{}, RunLedger(ledger_config)};

  // event times: cadence multiples, snapshots, t_end
  std::set<double> events;
  if (observer.cadence > 0.0)
    for (double t = observer.cadence; t < config.t_end + 0.5 * observer.cadence;
         t += observer.cadence)
      events.insert(std::min(t, config.t_end));
  for (double t : observer.snapshot_times)
    if (t > 0.0 && t <= config.t_end) events.insert(t);
  events.insert(config.t_end);

  const auto is_snapshot_time = [&](double t) {
    for (double st : observer.snapshot_times)
      if (std::abs(st - t) <= 1e-12 * std::max(1.0, config.t_end)) return true;
    return false;
  };

  result.ledger.observe(0.0, u0);
  result.trajectory.append(0.0, u0);

  if (config.t_end == 0.0) return result;

  Field u = u0;
  double t = 0.0;
  Stepper::StepStats stats;

  try {
    if (config.scheme == Scheme::duhamel) {
      while (t < config.t_end - 1e-12) {
        const double window = std::min(config.duhamel_window, config.t_end - t);
        Trajectory piece = duhamel_solve(u, config, window, config.duhamel_tol,
                                         config.duhamel_max_iter);
        result.ledger.advance(t + window, u);
        u = piece.samples.back().field;
        t += window;
        result.steps += static_cast<long long>(piece.dt_history.size());
        result.ledger.observe(t, u);
        if (is_snapshot_time(t) || t >= config.t_end - 1e-12 || observer.keep_observations)
          result.trajectory.append(t, u);
      }
      return result;
    }

    const double tiny = 1e-12 * std::max(1.0, config.t_end);
    auto next_event = events.begin();
    while (t < config.t_end - tiny) {
      while (next_event != events.end() && *next_event <= t + tiny) ++next_event;
      const double target = next_event == events.end() ? config.t_end : *next_event;
      double dt = std::min(stepper.cfl_dt(u), target - t);
      if (!(dt > 0.0)) throw NumericalAbort("run: nonpositive dt");
      result.ledger.advance(t + dt, u);
      u = config.scheme == Scheme::explicit_upwind ? stepper.explicit_step(u, dt, &stats)
                                                   : stepper.semi_implicit_step(u, dt, &stats);
      t += dt;
      result.trajectory.dt_history.push_back(dt);
      ++result.steps;
      if (t >= target - tiny) {
        t = target; // land exactly on the event for reproducible rows
        result.ledger.observe(t, u);
        if (is_snapshot_time(t) || t >= config.t_end - tiny || observer.keep_observations)
          result.trajectory.append(t, u);
      }
    }
  } catch (const NumericalAbort& abort) {
    result.aborted = true;
    result.abort_reason = abort.what();
  }
  result.clamped = stats.clamped;
  return result;
}

} // namespace nlpme
