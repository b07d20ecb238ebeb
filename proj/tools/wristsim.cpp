#include <cstdio>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vswrist/harness.hpp"

namespace {

using vswrist::RmsReport;
using vswrist::ScenarioConfig;
using vswrist::TrajectoryLog;

struct CommonFlags {
  std::string config_path;
  std::string out_path;
  std::optional<unsigned> seed;
  std::optional<double> dt;
  bool quiet = false;
};

ScenarioConfig load_with_overrides(const CommonFlags& flags) {
  ScenarioConfig cfg = flags.config_path.empty()
                           ? vswrist::config_from_json(vswrist::default_config_json())
                           : vswrist::load_config(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.dt) {
    cfg.dynamics.dt_max = *flags.dt;
    vswrist::validate_config(cfg);
  }
  if (!flags.out_path.empty()) cfg.output_path = flags.out_path;
  return cfg;
}

void print_report(const ScenarioConfig& cfg, const TrajectoryLog& log) {
  if (log.halted) {
    std::printf("halted at t = %.6g s: %s\n", log.halt_time,
                log.halt_reason.c_str());
  }
  for (const std::string& v : log.violations) {
    std::printf("invariant violation: %s\n", v.c_str());
  }
  if (log.samples.empty()) {
    std::printf("no samples logged (zero duration)\n");
    return;
  }
  const RmsReport rms = vswrist::rms_metrics(log, cfg.metrics_start);
  std::printf("samples: %zu, final t = %.6g s\n", log.samples.size(),
              log.samples.back().t);
  std::printf("rms posture error [rad] (t >= %.6g s): %.6g\n", rms.t_start,
              rms.rms_error);
  std::printf("rms actuation torque [N m]: %.6g\n", rms.rms_torque);
  std::printf("final preload [N mm]: %.6g, objective: %.6g\n",
              log.samples.back().lambda, log.samples.back().objective);
}

int dispatch(int argc, char** argv) {
  CLI::App app{"variable stiffness wrist simulator"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto add_common = [&](CLI::App* sub, bool with_config_flag) {
    if (with_config_flag)
      sub->add_option("--config", flags.config_path, "config file (JSON)");
    sub->add_option("--out", flags.out_path, "output path override");
    sub->add_option("--seed", flags.seed, "record a run seed in the config");
    sub->add_option("--dt", flags.dt, "integrator step override [s]");
    sub->add_flag("--quiet", flags.quiet, "suppress the run report");
  };

  CLI::App* run = app.add_subcommand("run", "simulate one scenario");
  run->add_option("config_file", flags.config_path, "config file (JSON)");
  add_common(run, true);

  CLI::App* sweep =
      app.add_subcommand("sweep", "static stiffness sweep over preloads");
  sweep->add_option("config_file", flags.config_path, "config file (JSON)");
  std::string lambda_list;
  sweep->add_option("--lambda", lambda_list,
                    "comma-separated preloads [N mm]")
      ->required();
  add_common(sweep, true);

  CLI::App* exp = app.add_subcommand(
      "paper-experiment", "loaded tracking study at soft and stiff preloads");
  add_common(exp, false);

  CLI::App* validate =
      app.add_subcommand("validate", "parse and validate a config");
  validate->add_option("config_file", flags.config_path, "config file (JSON)")
      ->required();
  add_common(validate, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (run->parsed()) {
    const ScenarioConfig cfg = load_with_overrides(flags);
    const TrajectoryLog log = vswrist::run_scenario(cfg);
    vswrist::write_trajectory_csv(log, cfg.output_path);
    if (!flags.quiet) {
      print_report(cfg, log);
      std::printf("trajectory written to %s\n", cfg.output_path.c_str());
    }
    return log.halted ? 3 : 0;
  }
  if (sweep->parsed()) {
    const ScenarioConfig cfg = load_with_overrides(flags);
    std::vector<double> lambdas;
    std::string token;
    std::stringstream ss(lambda_list);
    while (std::getline(ss, token, ',')) {
      try {
        lambdas.push_back(std::stod(token));
      } catch (const std::exception&) {
        std::fprintf(stderr, "bad preload value: %s\n", token.c_str());
        return 1;
      }
    }
    const std::vector<vswrist::SweepRow> rows =
        vswrist::stiffness_sweep(cfg, lambdas);
    const std::string path =
        flags.out_path.empty() ? "stiffness_sweep.csv" : flags.out_path;
    vswrist::write_sweep_csv(rows, path);
    if (!flags.quiet) {
      for (const vswrist::SweepRow& r : rows) {
        std::printf("lambda %.6g N mm: stiffness eigenvalues %.6g, %.6g N mm/rad\n",
                    r.lambda, r.sigma_eig(0), r.sigma_eig(1));
      }
      std::printf("sweep written to %s\n", path.c_str());
    }
    return 0;
  }
  if (exp->parsed()) {
    const std::string dir = flags.out_path.empty() ? "." : flags.out_path;
    const vswrist::ExperimentResult result = vswrist::paper_experiment(dir);
    if (!flags.quiet) std::fputs(result.summary.c_str(), stdout);
    return (result.low_log.halted || result.high_log.halted) ? 3 : 0;
  }
  // validate
  vswrist::load_config(flags.config_path);
  if (!flags.quiet) std::printf("config ok: %s\n", flags.config_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const vswrist::SimulationHalt& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
