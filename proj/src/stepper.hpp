#pragma once

#include <complex>
#include <string>
#include <vector>

#include "diagnostics.hpp"
#include "fracops.hpp"
#include "grid.hpp"
#include "nonlinearity.hpp"

namespace nlpme {

/// A step or solver left the admissible state space (CFL violation,
/// negativity beyond rounding, non-contracting fixed-point map).
class NumericalAbort : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Scheme { explicit_upwind, semi_implicit, duhamel };

struct SolverConfig {
  double s = 0.5;
  double epsilon = 0.0; // 0 = exact operator
  double delta = 0.0;   // vanishing viscosity
  NonlinearitySpec nonlinearity;
  double t_end = 1.0;
  double cfl_safety = 0.5;
  double dt_max = 1e-2;
  Scheme scheme = Scheme::explicit_upwind;
  /// How the velocity multiplier is realized when epsilon > 0.
  OperatorMode operator_mode = OperatorMode::exact_symbol;
  double positivity_floor = 0.0;

  // Duhamel fixed-point controls.
  double duhamel_window = 0.05;
  double duhamel_tol = 1e-8;
  int duhamel_max_iter = 50;
  int duhamel_nodes = 32;
  bool duhamel_freeze_mobility = false; // test hook: G == 0 makes the map constant

  void validate() const;
};

/// Snapshots plus the per-step dt history of one run.
struct Trajectory {
  std::vector<Sample> samples;
  std::vector<double> dt_history;

  void append(double t, Field field);
};

/// Time integrator bound to one grid and configuration. The velocity
/// multiplier tables (exact |xi|^{-2s} route or the regularized
/// grad (-Delta)^{-1} L^{1-s}_eps route) are precomputed at construction.
class Stepper {
public:
  Stepper(GridPtr grid, SolverConfig config);

  const SolverConfig& config() const { return config_; }
  const GridPtr& grid() const { return grid_; }

  /// Pressure gradient grad (-Delta)^{-s} u per axis at cell centers
  /// (the regularized route substitutes grad (-Delta)^{-1} L^{1-s}_eps u).
  std::vector<Field> velocity(const Field& u) const;

  /// Same multiplier with the half-cell phase shift: values on the faces
  /// (i+1/2) along each axis.
  std::vector<Field> face_velocity(const Field& u) const;

  /// cfl_safety * min(dx/(2 N max|v| max G'), dx^2/(2 N delta)), capped by
  /// dt_max. Zero velocity returns dt_max.
  double cfl_dt(const Field& u) const;

  struct StepStats {
    long long clamped = 0;
    double min_before_clamp = 0.0;
  };

  /// Conservative positivity-preserving donor-cell update plus explicit
  /// second-order viscosity. Mass telescopes exactly on the torus.
  Field explicit_step(const Field& u, double dt, StepStats* stats = nullptr) const;

  /// Advective flux explicit as above, viscosity absorbed spectrally by
  /// dividing the spectrum by (1 + dt delta |xi|^2).
  Field semi_implicit_step(const Field& u, double dt, StepStats* stats = nullptr) const;

private:
  Field advect(const Field& u, double dt, bool fd_viscosity, StepStats* stats) const;

  GridPtr grid_;
  SolverConfig config_;
  std::vector<std::vector<std::complex<double>>> center_mult_; // per axis
  std::vector<std::vector<std::complex<double>>> face_mult_;   // per axis
  std::vector<double> xi_sq_; // |xi|^2 per mode, for the implicit divide
};

struct DuhamelReport {
  std::vector<double> distances; // sup_tau ||v_{k+1} - v_k||_2 per sweep
  int iterations = 0;
  bool converged = false;
};

/// Picard iteration on the Duhamel map
///   T(v)(t) = e^{delta t Lap} u0
///           + int_0^t grad e^{delta (t-tau) Lap} . G(v)(tau) dtau,
///   G(v)  = G'(v) grad (-Delta)^{-1} L^{1-s}_eps [v],
/// time-discretized on a uniform lattice with trapezoid quadrature.
/// Aborts when successive distances fail to contract three times in a row.
Trajectory duhamel_solve(const Field& u0, const SolverConfig& config, double t_window,
                         double tol, int max_iter, DuhamelReport* report = nullptr);

struct ObserverConfig {
  double cadence = 0.1;               // <= 0: observe only t = 0 and t_end
  std::vector<double> snapshot_times; // retained in the trajectory
  bool keep_observations = false;     // retain every observed state
};

struct RunResult {
  Trajectory trajectory;
  RunLedger ledger;
  long long steps = 0;
  long long clamped = 0;
  bool aborted = false;
  std::string abort_reason;
};

/// Drive the configured scheme to t_end, observing the ledger at the given
/// cadence. On numerical abort the partial trajectory and ledger are
/// returned with the abort flagged.
RunResult run(const Field& u0, const SolverConfig& config, const ObserverConfig& observer,
              LedgerConfig ledger_config);

} // namespace nlpme
