#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "vswrist/elasticity.hpp"
#include "vswrist/harness.hpp"

namespace vswrist {

namespace {

constexpr double kMassScale = 1e-3;  // kg to the solver's mass unit

double quintic(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

/// Current reference targets with quintic blending from the value each held
/// when its last retarget fired.
struct RefTracker {
  MinimalCoords from{0.0, 0.0}, to{0.0, 0.0};
  double t0 = 0.0, dur = 0.0;
  double ps_from = 0.0, ps_to = 0.0, ps_t0 = 0.0, ps_dur = 0.0;

  MinimalCoords posture(double t) const {
    if (dur <= 0.0 || t >= t0 + dur) return to;
    const double s = quintic((t - t0) / dur);
    return {from.alpha_y + s * (to.alpha_y - from.alpha_y),
            from.alpha_z + s * (to.alpha_z - from.alpha_z)};
  }

  double ps(double t) const {
    if (ps_dur <= 0.0 || t >= ps_t0 + ps_dur) return ps_to;
    const double s = quintic((t - ps_t0) / ps_dur);
    return ps_from + s * (ps_to - ps_from);
  }
};

Eigen::Matrix2d realized_compliance(const MinimalCoords& u, double lambda,
                                    const ScenarioConfig& cfg,
                                    Eigen::Vector4d* seed) {
  const Eigen::Vector3d delta = equilibrium_deflections(
      u, lambda, cfg.dynamics.springs, cfg.geometry, seed);
  return coupler_compliance(u, delta, cfg.dynamics.springs, cfg.geometry, seed);
}

LogSample make_sample(double t, const SimState& s, const MinimalCoords& u_ref,
                      const Eigen::Matrix2d& c_ref, const ScenarioConfig& cfg,
                      Eigen::Vector4d* ctrl_seed) {
  LogSample row;
  row.t = t;
  row.u = s.u;
  row.u_ref = u_ref;
  row.theta = s.theta;
  row.theta_ps = s.theta_ps;
  row.lambda = s.lambda_r;

  const Eigen::Vector4d* state_seed = s.seeded ? &s.closure_seed : nullptr;
  const StackedJointAngles q = ik_all_legs(s.u, cfg.geometry, state_seed);
  row.tau_a = elastic_actuation(q, s.theta, cfg.dynamics.springs);
  const Eigen::Vector3d delta(q.q_A.q1 - s.theta(0), q.q_B.q1 - s.theta(1),
                              q.q_C.q1 - s.theta(2));
  const Eigen::Matrix2d sigma =
      coupler_stiffness(s.u, delta, cfg.dynamics.springs, cfg.geometry, state_seed);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sigma);
  row.sigma_eig = es.eigenvalues();

  row.objective = compliance_objective(s.lambda_r, u_ref, c_ref,
                                       cfg.dynamics.springs, cfg.geometry,
                                       ctrl_seed);
  const double ey = u_ref.alpha_y - s.u.alpha_y;
  const double ez = u_ref.alpha_z - s.u.alpha_z;
  row.e_rms_inst = std::sqrt(0.5 * (ey * ey + ez * ez));
  return row;
}

void monitor_sample(const LogSample& row, const ScenarioConfig& cfg,
                    TrajectoryLog& log) {
  const auto record = [&](const std::string& what) {
    std::ostringstream msg;
    msg << "t=" << row.t << ": " << what;
    log.violations.push_back(msg.str());
  };
  const bool finite =
      std::isfinite(row.t) && std::isfinite(row.u.alpha_y) &&
      std::isfinite(row.u.alpha_z) && row.theta.allFinite() &&
      std::isfinite(row.theta_ps) && row.tau_a.allFinite() &&
      std::isfinite(row.lambda) && row.sigma_eig.allFinite() &&
      std::isfinite(row.objective) && std::isfinite(row.e_rms_inst);
  if (!finite) record("non-finite log sample");
  if (row.lambda < cfg.control.lm.lambda_bounds(0) ||
      row.lambda > cfg.control.lm.lambda_bounds(1)) {
    record("preload reference escaped its bounds");
  }
  if (!(row.sigma_eig(0) > 0.0)) record("coupler stiffness lost definiteness");
  if (log.samples.size() > 1 &&
      !(row.t > log.samples[log.samples.size() - 2].t)) {
    record("log time went backwards");
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

TrajectoryLog run_scenario(const ScenarioConfig& config) {
  validate_config(config);
  const WristGeometry& geom = config.geometry;
  const DynParams& p = config.dynamics;
  const ControllerParams& cp = config.control;

  const int ticks = static_cast<int>(std::round(config.duration / cp.dt_ctrl));
  const int substeps = static_cast<int>(std::round(cp.dt_ctrl / p.dt_max));
  const int log_every = static_cast<int>(
      std::round(1.0 / (config.log_rate * cp.dt_ctrl)));

  TrajectoryLog log;
  if (ticks == 0) return log;

  SimState s = initial_state(config.u0, p, geom);
  Eigen::Vector4d ctrl_seed = s.closure_seed;
  const Eigen::Vector3d q1_0 = posture_reference(config.u0, geom, &ctrl_seed);
  s.theta = motor_references(q1_0, config.lambda0,
                             nullspace_base(config.u0, geom, &ctrl_seed),
                             cp.springs);
  s.lambda_r = config.lambda0;

  RefTracker refs;
  refs.from = refs.to = config.u0;
  Eigen::Matrix2d c_ref =
      realized_compliance(config.u0, config.lambda0, config, &ctrl_seed);
  Eigen::Matrix<double, 6, 1> wrench = Eigen::Matrix<double, 6, 1>::Zero();

  std::size_t next_event = 0;
  const auto apply_events = [&](double t) {
    while (next_event < config.timeline.size() &&
           config.timeline[next_event].time <= t + 1e-12) {
      const TimelineEvent& e = config.timeline[next_event];
      if (e.u_ref) {
        refs.from = refs.posture(t);
        refs.to = *e.u_ref;
        refs.t0 = t;
        refs.dur = e.blend;
      }
      if (e.theta_ps_ref) {
        refs.ps_from = refs.ps(t);
        refs.ps_to = *e.theta_ps_ref;
        refs.ps_t0 = t;
        refs.ps_dur = e.blend;
      }
      if (e.compliance_ref) {
        c_ref = *e.compliance_ref;
      } else if (e.preload_ref) {
        c_ref = realized_compliance(refs.to, *e.preload_ref, config, &ctrl_seed);
      }
      if (e.load_mass) {
        wrench.setZero();
        wrench.head<3>() = *e.load_mass * kMassScale * p.gravity;
      }
      if (e.wrench) wrench = *e.wrench;
      ++next_event;
    }
  };

  try {
    for (int k = 0; k < ticks; ++k) {
      const double t = k * cp.dt_ctrl;
      apply_events(t);
      const MinimalCoords u_ref = refs.posture(t);
      if (k % log_every == 0) {
        log.samples.push_back(make_sample(t, s, u_ref, c_ref, config, &ctrl_seed));
        monitor_sample(log.samples.back(), config, log);
      }
      ControlReferences r;
      r.u_ref = u_ref;
      r.theta_ps_ref = refs.ps(t);
      r.compliance_ref = c_ref;
      const ControlCommand cmd = controller_tick(s, r, cp, geom, &ctrl_seed);
      s.lambda_r = cmd.lambda;
      for (int j = 0; j < substeps; ++j) {
        s = step(s, cmd.motor_command, cmd.theta_ps_command, wrench, p.dt_max,
                 p, geom);
      }
    }
    const double t_end = ticks * cp.dt_ctrl;
    log.samples.push_back(
        make_sample(t_end, s, refs.posture(t_end), c_ref, config, &ctrl_seed));
    monitor_sample(log.samples.back(), config, log);
  } catch (const SimulationHalt& halt) {
    log.halted = true;
    log.halt_reason = halt.what();
    log.halt_time = s.t;
  }
  return log;
}

RmsReport rms_metrics(const TrajectoryLog& log, double t_start) {
  RmsReport out;
  out.t_start = t_start;
  double sum_axis[2] = {0.0, 0.0};
  double sum_leg[3] = {0.0, 0.0, 0.0};
  for (const LogSample& row : log.samples) {
    if (row.t < t_start - 1e-12) continue;
    ++out.sample_count;
    const double ey = row.u_ref.alpha_y - row.u.alpha_y;
    const double ez = row.u_ref.alpha_z - row.u.alpha_z;
    sum_axis[0] += ey * ey;
    sum_axis[1] += ez * ez;
    for (int k = 0; k < 3; ++k) sum_leg[k] += row.tau_a(k) * row.tau_a(k);
  }
  if (out.sample_count == 0) {
    throw std::invalid_argument("metrics window holds no log samples");
  }
  const double n = static_cast<double>(out.sample_count);
  out.rms_error_axis(0) = std::sqrt(sum_axis[0] / n);
  out.rms_error_axis(1) = std::sqrt(sum_axis[1] / n);
  out.rms_error = std::sqrt((sum_axis[0] + sum_axis[1]) / (2.0 * n));
  const double to_nm = 1e-3;
  for (int k = 0; k < 3; ++k)
    out.rms_torque_leg(k) = to_nm * std::sqrt(sum_leg[k] / n);
  out.rms_torque =
      to_nm * std::sqrt((sum_leg[0] + sum_leg[1] + sum_leg[2]) / (3.0 * n));
  return out;
}

std::vector<SweepRow> stiffness_sweep(const ScenarioConfig& config,
                                      const std::vector<double>& lambdas) {
  validate_config(config);
  for (double lambda : lambdas) {
    if (!std::isfinite(lambda) || lambda < config.control.lm.lambda_bounds(0) ||
        lambda > config.control.lm.lambda_bounds(1)) {
      throw std::invalid_argument(
          "sweep preload outside control.lambda_bounds_nmm: " + fmt(lambda));
    }
  }
  std::vector<SweepRow> rows;
  rows.reserve(lambdas.size());
  const MinimalCoords center{0.0, 0.0};
  Eigen::Vector4d seed;
  Eigen::Vector4d* seed_ptr = nullptr;
  for (double lambda : lambdas) {
    SweepRow row;
    row.lambda = lambda;
    const Eigen::Vector3d delta = equilibrium_deflections(
        center, lambda, config.dynamics.springs, config.geometry, seed_ptr);
    const Eigen::Matrix2d sigma = coupler_stiffness(
        center, delta, config.dynamics.springs, config.geometry, seed_ptr);
    seed = solve_closure(center, config.geometry).v;
    seed_ptr = &seed;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sigma);
    row.sigma_eig = es.eigenvalues();
    row.compliance_eig =
        Eigen::Vector2d(1.0 / row.sigma_eig(1), 1.0 / row.sigma_eig(0));
    row.tau_a =
        internal_torques(lambda, nullspace_base(center, config.geometry, seed_ptr));
    rows.push_back(row);
  }
  return rows;
}

void write_trajectory_csv(const TrajectoryLog& log, const std::string& path) {
  std::string out =
      "t,alpha_y,alpha_z,alpha_y_ref,alpha_z_ref,theta_1,theta_2,theta_3,"
      "theta_ps,tau_a_1,tau_a_2,tau_a_3,lambda,sigma_eig_1,sigma_eig_2,"
      "G_lambda,e_rms_inst\n";
  const double to_nm = 1e-3;
  for (const LogSample& r : log.samples) {
    out += fmt(r.t);
    out += ',' + fmt(r.u.alpha_y) + ',' + fmt(r.u.alpha_z);
    out += ',' + fmt(r.u_ref.alpha_y) + ',' + fmt(r.u_ref.alpha_z);
    for (int k = 0; k < 3; ++k) out += ',' + fmt(r.theta(k));
    out += ',' + fmt(r.theta_ps);
    for (int k = 0; k < 3; ++k) out += ',' + fmt(to_nm * r.tau_a(k));
    out += ',' + fmt(r.lambda);
    out += ',' + fmt(r.sigma_eig(0)) + ',' + fmt(r.sigma_eig(1));
    out += ',' + fmt(r.objective) + ',' + fmt(r.e_rms_inst);
    out += '\n';
  }
  write_atomic(path, out);
}

void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::string& path) {
  std::string out =
      "lambda,compliance_eig_1,compliance_eig_2,sigma_eig_1,sigma_eig_2,"
      "tau_a_1,tau_a_2,tau_a_3\n";
  const double to_nm = 1e-3;
  for (const SweepRow& r : rows) {
    out += fmt(r.lambda);
    out += ',' + fmt(r.compliance_eig(0)) + ',' + fmt(r.compliance_eig(1));
    out += ',' + fmt(r.sigma_eig(0)) + ',' + fmt(r.sigma_eig(1));
    for (int k = 0; k < 3; ++k) out += ',' + fmt(to_nm * r.tau_a(k));
    out += '\n';
  }
  write_atomic(path, out);
}

ScenarioConfig experiment_config(bool high) {
  ScenarioConfig c = config_from_json(default_config_json());
  const double preload = high ? 30000.0 : 1000.0;
  c.lambda0 = preload;
  c.control.lm.lambda_init = preload;
  for (TimelineEvent& e : c.timeline) {
    if (e.preload_ref) e.preload_ref = preload;
  }
  c.output_path = high ? "trial_high_stiffness.csv" : "trial_low_stiffness.csv";
  return c;
}

ExperimentResult paper_experiment(const std::string& out_dir) {
  ExperimentResult result;
  const ScenarioConfig low = experiment_config(false);
  const ScenarioConfig high = experiment_config(true);

  result.low_log = run_scenario(low);
  result.high_log = run_scenario(high);
  result.low_rms = rms_metrics(result.low_log, low.metrics_start);
  result.high_rms = rms_metrics(result.high_log, high.metrics_start);
  result.sweep = stiffness_sweep(low, {0.0, 1000.0, 10000.0, 30000.0});

  write_trajectory_csv(result.low_log, join_path(out_dir, low.output_path));
  write_trajectory_csv(result.high_log, join_path(out_dir, high.output_path));
  write_sweep_csv(result.sweep, join_path(out_dir, "stiffness_sweep.csv"));

  std::ostringstream sum;
  sum << "loaded tracking study: soft versus stiff preload\n";
  sum << "1.5 kg hung at the payload point at t = 0.5 s; metrics over t >= "
      << fmt6(low.metrics_start) << " s\n\n";
  sum << "trial             preload [N mm]   rms error [rad]   rms torque [N m]\n";
  const auto line = [&](const char* name, double preload, const RmsReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-17s %-16s %-17s %s\n", name,
                  fmt6(preload).c_str(), fmt6(r.rms_error).c_str(),
                  fmt6(r.rms_torque).c_str());
    sum << buf;
  };
  line("low stiffness", 1000.0, result.low_rms);
  line("high stiffness", 30000.0, result.high_rms);
  sum << "\nerror ratio low/high: "
      << fmt6(result.low_rms.rms_error / result.high_rms.rms_error)
      << " (study target >= 5)\n";
  sum << "torque ratio high/low: "
      << fmt6(result.high_rms.rms_torque / result.low_rms.rms_torque)
      << " (study target > 1)\n";
  if (result.low_log.halted) {
    sum << "warning: low-stiffness trial halted at t = "
        << fmt6(result.low_log.halt_time) << " s: " << result.low_log.halt_reason
        << "\n";
  }
  if (result.high_log.halted) {
    sum << "warning: high-stiffness trial halted at t = "
        << fmt6(result.high_log.halt_time) << " s: "
        << result.high_log.halt_reason << "\n";
  }
  result.summary = sum.str();
  write_atomic(join_path(out_dir, "summary.txt"), result.summary);
  return result;
}

}  // namespace vswrist
