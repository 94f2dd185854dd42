#pragma once

#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "diagnostics.hpp"
#include "grid.hpp"
#include "stepper.hpp"

namespace nlpme {

// ---------------------------------------------------------------------------
// Initial data.
// ---------------------------------------------------------------------------

struct InitialDataSpec {
  enum class Kind { gaussian, box, mollified_dirac, from_file };
  Kind kind = Kind::gaussian;
  double mass = 1.0;
  double width = 1.0; // sigma for gaussian, half-width for box
  std::vector<double> center;
  double mollifier_width = 0.1;
  std::string path; // from_file

  void validate(const Grid& grid) const;
};

/// Sample the requested datum and renormalize its discrete mass to
/// spec.mass exactly (multiplicative correction, reported through
/// renorm_factor). from_file loads a snapshot unmodified.
Field make_initial(const InitialDataSpec& spec, const GridPtr& grid,
                   double* renorm_factor = nullptr);

// ---------------------------------------------------------------------------
// Scenario configuration: [grid] [operator] [nonlinearity] [solver]
// [initial] [observer] [output].
// ---------------------------------------------------------------------------

struct OutputConfig {
  std::string dir = "out";
  bool write_snapshots = true;
  bool snapshot_csv = false;
};

struct ScenarioConfig {
  int dim = 1;
  double half_length = 16.0;
  int points = 256;
  SolverConfig solver;
  InitialDataSpec initial;
  ObserverConfig observer;
  std::vector<double> lp_set = {2.0};
  double support_threshold = -1.0;
  double tail_r0 = 0.0;
  bool assert_checks = true;
  OutputConfig output;

  static ScenarioConfig from_tree(ConfigTree& tree);
};

/// Resolve the artifact directory: $NLPME_OUT, when set, becomes the root
/// for relative output paths.
std::string resolve_output_dir(const std::string& configured);

// ---------------------------------------------------------------------------
// Scenario runner.
// ---------------------------------------------------------------------------

struct ScenarioResult {
  int exit_status = 0; // 0 pass, 1 check fail, 2 config error, 3 numerical abort
  std::string artifact_dir;
  std::vector<CheckResult> checks;
  bool aborted = false;
  std::string abort_reason;
  std::optional<SmoothingFit> smoothing; // when the ledger covers a decade
  // effective parameters and end-state diagnostics, for sweep summaries
  double m = 0.0, s = 0.0, epsilon = 0.0, delta = 0.0, mu = 0.0;
  double support_radius_end = 0.0;
  double tail_min_end = 0.0;
};

/// Run one configured scenario and write its artifact directory: config
/// snapshot, ledger CSV, check report JSON, and field snapshots at the
/// requested times. Throws ConfigError on malformed input (no artifacts);
/// numerical aborts produce partial artifacts and exit status 3.
ScenarioResult run_scenario(const std::string& config_path, const std::string& overrides = "");

/// In-memory variant for tests and sweep workers.
ScenarioResult run_scenario(ScenarioConfig config, const std::string& config_snapshot_text);

// ---------------------------------------------------------------------------
// Operator battery (`check-ops`).
// ---------------------------------------------------------------------------

struct CheckOpsReport {
  std::vector<CheckResult> checks;
  bool all_passed = true;
  std::string json() const;
};

/// The full fracops invariant battery: eigenfunction exactness, symbol
/// domination and monotonicity over the (s, eps) matrix, eps-convergence
/// toward the exact symbol, square-root identity, operator symmetry, and
/// the generalized Stroock-Varopoulos inequality.
CheckOpsReport check_ops();

// ---------------------------------------------------------------------------
// Parameter sweeps.
// ---------------------------------------------------------------------------

struct SweepSpec {
  std::string base_config_path;
  std::map<std::string, std::vector<double>> axes; // override key -> values
  int jobs = 1;
  std::string output_dir = "sweep";

  static SweepSpec from_file(const std::string& path);
};

struct SweepRunRow {
  std::string dir;
  std::map<std::string, double> axis_values;
  int exit_status = 0;
  std::vector<CheckResult> checks;
  double m = 0.0, s = 0.0, epsilon = 0.0, delta = 0.0, mu = 0.0;
  double gamma_hat = std::numeric_limits<double>::quiet_NaN();
  double gamma_theory = 0.0;
  double support_radius = 0.0;
  double tail_min = 0.0;
};

struct SweepResult {
  int exit_status = 0;
  std::string output_dir;
  std::vector<SweepRunRow> rows;
};

/// Execute the cartesian product of the axes under a bounded worker pool;
/// each run owns an isolated artifact directory; failures are recorded and
/// the sweep continues. Writes summary.csv in the sweep directory.
SweepResult sweep(const std::string& spec_path, int jobs_override = 0);

// ---------------------------------------------------------------------------
// Consolidated reporting.
// ---------------------------------------------------------------------------

/// Walk an artifact tree, collect per-run report.json files, and emit one
/// consolidated JSON + CSV pair (deterministic ordering). Missing files are
/// listed; a partial report is still produced.
int emit_report(const std::string& artifact_dir, const std::string& out_base = "");

} // namespace nlpme
