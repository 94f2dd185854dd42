// nlpme command line front end. Links the public C API only.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlpme.h"

namespace {

int finish(nlpme_status status, int exit_status) {
  if (status != NLPME_OK) {
    std::fprintf(stderr, "nlpme: %s\n", nlpme_last_error());
    switch (status) {
      case NLPME_ERR_CONFIG: return 2;
      case NLPME_ERR_NUMERICAL: return 3;
      default: return 2;
    }
  }
  return exit_status;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"nlpme: porous medium flow driven by nonlocal pressure"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(nlpme_version()));

  // run
  auto* run_cmd = app.add_subcommand("run", "run one configured scenario");
  std::string config_path;
  std::vector<std::string> overrides;
  run_cmd->add_option("--config", config_path, "TOML or JSON configuration file")
      ->required();
  run_cmd->add_option("--override", overrides, "section.key=value override (repeatable)");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter sweep");
  std::string spec_path;
  int jobs = 0;
  sweep_cmd->add_option("--spec", spec_path, "sweep specification file")->required();
  sweep_cmd->add_option("--jobs", jobs, "worker pool size (default: from the spec)");

  // check-ops
  auto* check_cmd = app.add_subcommand("check-ops", "run the operator invariant battery");
  std::string report_path;
  check_cmd->add_option("--out", report_path, "report JSON path (default: checkops_report.json)");

  // report
  auto* report_cmd = app.add_subcommand("report", "consolidate artifact reports");
  std::string artifact_dir;
  std::string out_base;
  report_cmd->add_option("dir", artifact_dir, "artifact directory to scan")->required();
  report_cmd->add_option("--out", out_base, "output base path (default: <dir>/consolidated)");

  CLI11_PARSE(app, argc, argv);

  int exit_status = 0;
  if (*run_cmd) {
    std::string joined;
    for (const auto& o : overrides) {
      joined += o;
      joined += '\n';
    }
    const nlpme_status st =
        nlpme_run_scenario(config_path.c_str(), joined.empty() ? nullptr : joined.c_str(),
                           &exit_status);
    if (st == NLPME_OK && exit_status != 0)
      std::fprintf(stderr, "nlpme run: finished with status %d%s\n", exit_status,
                   exit_status == 1   ? " (asserted checks failed)"
                   : exit_status == 2 ? " (configuration error)"
                   : exit_status == 3 ? " (numerical abort; partial artifacts written)"
                                      : "");
    return finish(st, exit_status);
  }
  if (*sweep_cmd) {
    return finish(nlpme_sweep(spec_path.c_str(), jobs, &exit_status), exit_status);
  }
  if (*check_cmd) {
    const nlpme_status st =
        nlpme_check_ops(report_path.empty() ? nullptr : report_path.c_str(), &exit_status);
    if (st == NLPME_OK)
      std::printf("check-ops: %s\n", exit_status == 0 ? "PASS" : "FAIL");
    return finish(st, exit_status);
  }
  if (*report_cmd) {
    return finish(nlpme_report(artifact_dir.c_str(), out_base.empty() ? nullptr : out_base.c_str(),
                               &exit_status),
                  exit_status);
  }
  return 2;
}
