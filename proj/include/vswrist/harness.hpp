#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vswrist/control.hpp"
#include "vswrist/dynamics.hpp"

namespace vswrist {

/// One scheduled change. Reference fields retarget the controller; the load
/// fields replace the external wrench acting at the payload attachment point.
struct TimelineEvent {
  double time = 0.0;  // s
  std::optional<MinimalCoords> u_ref;
  double blend = 0.0;  // s, quintic ramp applied to posture and ps targets
  std::optional<double> theta_ps_ref;
  /// Preload target; the compliance reference becomes the one this preload
  /// realizes at the posture target current when the event fires.
  std::optional<double> preload_ref;
  std::optional<Eigen::Matrix2d> compliance_ref;  // explicit alternative
  std::optional<double> load_mass;  // kg hung at the payload point
  std::optional<Eigen::Matrix<double, 6, 1>> wrench;  // N, N·mm
};

struct ScenarioConfig {
  WristGeometry geometry;
  DynParams dynamics;
  ControllerParams control;
  MinimalCoords u0;
  double lambda0 = 100.0;  // initial preload reference, N·mm
  std::vector<TimelineEvent> timeline;
  double duration = 2.0;      // s, may be zero for a header-only run
  double log_rate = 1000.0;   // Hz
  double metrics_start = 0.0; // s, RMS window opening
  std::uint64_t seed = 0;     // recorded for provenance; the run is deterministic
  std::string output_path = "trajectory.csv";
};

struct LogSample {
  double t = 0.0;
  MinimalCoords u, u_ref;
  Eigen::Vector3d theta = Eigen::Vector3d::Zero();
  double theta_ps = 0.0;
  Eigen::Vector3d tau_a = Eigen::Vector3d::Zero();  // N·mm
  double lambda = 0.0;
  Eigen::Vector2d sigma_eig = Eigen::Vector2d::Zero();  // N·mm/rad, ascending
  double objective = 0.0;
  double e_rms_inst = 0.0;  // rad
};

struct TrajectoryLog {
  std::vector<LogSample> samples;
  bool halted = false;
  std::string halt_reason;
  double halt_time = 0.0;
  std::vector<std::string> violations;  // invariant monitor records
};

struct RmsReport {
  double rms_error = 0.0;  // rad, both tilt errors stacked
  Eigen::Vector2d rms_error_axis = Eigen::Vector2d::Zero();
  double rms_torque = 0.0;  // N·m, three leg torques stacked
  Eigen::Vector3d rms_torque_leg = Eigen::Vector3d::Zero();
  std::size_t sample_count = 0;
  double t_start = 0.0;
};

struct SweepRow {
  double lambda = 0.0;
  Eigen::Vector2d compliance_eig = Eigen::Vector2d::Zero();  // rad/N·mm, ascending
  Eigen::Vector2d sigma_eig = Eigen::Vector2d::Zero();       // N·mm/rad, ascending
  Eigen::Vector3d tau_a = Eigen::Vector3d::Zero();           // N·mm
};

struct ExperimentResult {
  TrajectoryLog low_log, high_log;
  RmsReport low_rms, high_rms;
  std::vector<SweepRow> sweep;
  std::string summary;
};

// Configuration I/O (src/config.cpp). Parsing and validation throw
// std::invalid_argument naming the offending field.
ScenarioConfig config_from_json(const std::string& text);
ScenarioConfig load_config(const std::string& path);
std::string default_config_json();
void validate_config(const ScenarioConfig& config);

TrajectoryLog run_scenario(const ScenarioConfig& config);

RmsReport rms_metrics(const TrajectoryLog& log, double t_start);

std::vector<SweepRow> stiffness_sweep(const ScenarioConfig& config,
                                      const std::vector<double>& lambdas);

void write_trajectory_csv(const TrajectoryLog& log, const std::string& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

/// Loaded-tracking study configs: soft trial when high is false, stiff trial
/// otherwise. Identical plants and timelines; only the preload targets differ.
ScenarioConfig experiment_config(bool high);

/// Runs both loaded trials plus the central stiffness sweep and writes
/// trial_low_stiffness.csv, trial_high_stiffness.csv, stiffness_sweep.csv,
/// and summary.txt under out_dir.
ExperimentResult paper_experiment(const std::string& out_dir);

}  // namespace vswrist
