#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "vswrist/harness.hpp"

namespace vswrist {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::invalid_argument(where + ": " + what);
}

double num_at(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

double positive_at(const json& j, const std::string& where) {
  const double v = num_at(j, where);
  if (!(v > 0.0) || !std::isfinite(v)) fail(where, "must be a positive number");
  return v;
}

const json& array_at(const json& j, const std::string& where, std::size_t n) {
  if (!j.is_array() || j.size() != n) {
    fail(where, "expected an array of " + std::to_string(n) + " numbers");
  }
  return j;
}

Eigen::Vector2d vec2_at(const json& j, const std::string& where) {
  const json& a = array_at(j, where, 2);
  return {num_at(a[0], where + "[0]"), num_at(a[1], where + "[1]")};
}

Eigen::Vector3d vec3_at(const json& j, const std::string& where) {
  const json& a = array_at(j, where, 3);
  return {num_at(a[0], where + "[0]"), num_at(a[1], where + "[1]"),
          num_at(a[2], where + "[2]")};
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) fail(where, "unknown field '" + it.key() + "'");
  }
}

const json* member(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

SpringParams spring_at(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  check_keys(j, where, {"k_nmm", "delta0_rad", "delta_max_rad"});
  SpringParams s;
  if (const json* v = member(j, "k_nmm")) s.K = positive_at(*v, where + ".k_nmm");
  if (const json* v = member(j, "delta0_rad"))
    s.delta0 = positive_at(*v, where + ".delta0_rad");
  if (const json* v = member(j, "delta_max_rad"))
    s.delta_max = positive_at(*v, where + ".delta_max_rad");
  return s;
}

LinkInertia link_at(const json& j, const std::string& where,
                    const LinkInertia& base) {
  if (!j.is_object()) fail(where, "expected an object");
  check_keys(j, where, {"mass_kg", "com_mm", "inertia_kgmm2"});
  LinkInertia out = base;
  if (const json* v = member(j, "mass_kg")) {
    out.mass = num_at(*v, where + ".mass_kg");
    if (out.mass < 0.0 || !std::isfinite(out.mass))
      fail(where + ".mass_kg", "must be a nonnegative number");
  }
  if (const json* v = member(j, "com_mm")) out.com = vec3_at(*v, where + ".com_mm");
  if (const json* v = member(j, "inertia_kgmm2")) {
    const std::string iw = where + ".inertia_kgmm2";
    if (!v->is_array()) fail(iw, "expected a 3-array (diagonal) or 3x3 array");
    if (v->size() != 3) fail(iw, "expected 3 entries");
    if ((*v)[0].is_array()) {
      Eigen::Matrix3d I;
      for (int r = 0; r < 3; ++r) {
        const json& row =
            array_at((*v)[r], iw + "[" + std::to_string(r) + "]", 3);
        for (int c = 0; c < 3; ++c)
          I(r, c) = num_at(row[c], iw + " entry");
      }
      out.inertia = I;
    } else {
      out.inertia = vec3_at(*v, iw).asDiagonal();
    }
  }
  return out;
}

TimelineEvent event_at(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  check_keys(j, where,
             {"t_s", "u_ref_rad", "blend_s", "theta_ps_ref_rad",
              "preload_ref_nmm", "compliance_ref_rad_per_nmm", "load_mass_kg",
              "wrench_n_nmm"});
  TimelineEvent e;
  const json* t = member(j, "t_s");
  if (!t) fail(where, "missing required field 't_s'");
  e.time = num_at(*t, where + ".t_s");
  if (const json* v = member(j, "u_ref_rad")) {
    const Eigen::Vector2d u = vec2_at(*v, where + ".u_ref_rad");
    e.u_ref = MinimalCoords{u(0), u(1)};
  }
  if (const json* v = member(j, "blend_s"))
    e.blend = num_at(*v, where + ".blend_s");
  if (const json* v = member(j, "theta_ps_ref_rad"))
    e.theta_ps_ref = num_at(*v, where + ".theta_ps_ref_rad");
  if (const json* v = member(j, "preload_ref_nmm"))
    e.preload_ref = num_at(*v, where + ".preload_ref_nmm");
  if (const json* v = member(j, "compliance_ref_rad_per_nmm")) {
    const std::string cw = where + ".compliance_ref_rad_per_nmm";
    if (!v->is_array() || v->size() != 2) fail(cw, "expected a 2x2 array");
    Eigen::Matrix2d m;
    for (int r = 0; r < 2; ++r) {
      const json& row = array_at((*v)[r], cw + "[" + std::to_string(r) + "]", 2);
      for (int c = 0; c < 2; ++c) m(r, c) = num_at(row[c], cw + " entry");
    }
    e.compliance_ref = m;
  }
  if (const json* v = member(j, "load_mass_kg"))
    e.load_mass = num_at(*v, where + ".load_mass_kg");
  if (const json* v = member(j, "wrench_n_nmm")) {
    const json& a = array_at(*v, where + ".wrench_n_nmm", 6);
    Eigen::Matrix<double, 6, 1> w;
    for (int i = 0; i < 6; ++i)
      w(i) = num_at(a[i], where + ".wrench_n_nmm entry");
    e.wrench = w;
  }
  return e;
}

}  // namespace

ScenarioConfig config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!root.is_object()) fail("config", "expected a JSON object");
  check_keys(root, "config",
             {"duration_s", "log_rate_hz", "metrics_start_s", "seed", "output",
              "geometry", "springs", "dynamics", "control", "initial",
              "timeline"});

  ScenarioConfig c;
  if (const json* v = member(root, "duration_s")) {
    c.duration = num_at(*v, "duration_s");
  }
  if (const json* v = member(root, "log_rate_hz"))
    c.log_rate = positive_at(*v, "log_rate_hz");
  if (const json* v = member(root, "metrics_start_s"))
    c.metrics_start = num_at(*v, "metrics_start_s");
  if (const json* v = member(root, "seed")) {
    if (!v->is_number_unsigned()) fail("seed", "expected a nonnegative integer");
    c.seed = v->get<std::uint64_t>();
  }
  if (const json* v = member(root, "output")) {
    if (!v->is_string()) fail("output", "expected a string");
    c.output_path = v->get<std::string>();
    if (c.output_path.empty()) fail("output", "must not be empty");
  }

  if (const json* g = member(root, "geometry")) {
    if (!g->is_object()) fail("geometry", "expected an object");
    check_keys(*g, "geometry",
               {"d_mm", "alpha_rad", "eta_rad", "u_max_rad", "azimuths_rad"});
    if (const json* v = member(*g, "d_mm"))
      c.geometry.d = positive_at(*v, "geometry.d_mm");
    if (const json* v = member(*g, "alpha_rad"))
      c.geometry.alpha = num_at(*v, "geometry.alpha_rad");
    if (const json* v = member(*g, "eta_rad"))
      c.geometry.eta = num_at(*v, "geometry.eta_rad");
    if (const json* v = member(*g, "u_max_rad"))
      c.geometry.u_max = positive_at(*v, "geometry.u_max_rad");
    if (const json* v = member(*g, "azimuths_rad")) {
      const Eigen::Vector3d az = vec3_at(*v, "geometry.azimuths_rad");
      for (int k = 0; k < 3; ++k) {
        if (std::abs(az(k) - WristGeometry::azimuths[k]) > 1e-12) {
          fail("geometry.azimuths_rad",
               "only the built-in symmetric three-leg layout is supported");
        }
      }
    }
  }

  c.dynamics = DynParams::defaults(c.geometry);

  if (const json* s = member(root, "springs")) {
    if (s->is_object()) {
      const SpringParams sp = spring_at(*s, "springs");
      c.dynamics.springs = {sp, sp, sp};
    } else if (s->is_array() && s->size() == 3) {
      for (int k = 0; k < 3; ++k) {
        c.dynamics.springs[k] =
            spring_at((*s)[k], "springs[" + std::to_string(k) + "]");
      }
    } else {
      fail("springs", "expected an object or an array of 3 objects");
    }
  }

  if (const json* d = member(root, "dynamics")) {
    if (!d->is_object()) fail("dynamics", "expected an object");
    check_keys(*d, "dynamics",
               {"payload_mass_kg", "payload_offset_mm", "gravity_mm_s2",
                "joint_damping_nmm_s", "motor_tau_s", "dt_s", "links"});
    if (const json* v = member(*d, "payload_mass_kg")) {
      c.dynamics.payload_mass = num_at(*v, "dynamics.payload_mass_kg");
      if (c.dynamics.payload_mass < 0.0)
        fail("dynamics.payload_mass_kg", "must be nonnegative");
    }
    if (const json* v = member(*d, "payload_offset_mm"))
      c.dynamics.payload_offset = num_at(*v, "dynamics.payload_offset_mm");
    if (const json* v = member(*d, "gravity_mm_s2"))
      c.dynamics.gravity = vec3_at(*v, "dynamics.gravity_mm_s2");
    if (const json* v = member(*d, "joint_damping_nmm_s")) {
      if (v->is_number()) {
        const double damp = num_at(*v, "dynamics.joint_damping_nmm_s");
        if (damp < 0.0) fail("dynamics.joint_damping_nmm_s", "must be nonnegative");
        c.dynamics.joint_damping.setConstant(damp);
      } else if (v->is_array() && v->size() == 12) {
        for (int i = 0; i < 12; ++i) {
          c.dynamics.joint_damping(i) =
              num_at((*v)[i], "dynamics.joint_damping_nmm_s entry");
        }
      } else {
        fail("dynamics.joint_damping_nmm_s",
             "expected a number or an array of 12 numbers");
      }
    }
    if (const json* v = member(*d, "motor_tau_s"))
      c.dynamics.motor_tau = positive_at(*v, "dynamics.motor_tau_s");
    if (const json* v = member(*d, "dt_s"))
      c.dynamics.dt_max = positive_at(*v, "dynamics.dt_s");
    if (const json* l = member(*d, "links")) {
      if (!l->is_object()) fail("dynamics.links", "expected an object");
      check_keys(*l, "dynamics.links",
                 {"hub", "upper_rod", "lower_rod", "coupler"});
      if (const json* v = member(*l, "hub"))
        c.dynamics.leg_links[0] =
            link_at(*v, "dynamics.links.hub", c.dynamics.leg_links[0]);
      if (const json* v = member(*l, "upper_rod"))
        c.dynamics.leg_links[1] =
            link_at(*v, "dynamics.links.upper_rod", c.dynamics.leg_links[1]);
      if (const json* v = member(*l, "lower_rod"))
        c.dynamics.leg_links[2] =
            link_at(*v, "dynamics.links.lower_rod", c.dynamics.leg_links[2]);
      if (const json* v = member(*l, "coupler"))
        c.dynamics.coupler =
            link_at(*v, "dynamics.links.coupler", c.dynamics.coupler);
    }
  }

  if (const json* k = member(root, "control")) {
    if (!k->is_object()) fail("control", "expected an object");
    check_keys(*k, "control",
               {"kp_per_s", "alpha", "nu", "lambda_init_nmm",
                "lambda_bounds_nmm", "dt_ctrl_s"});
    if (const json* v = member(*k, "kp_per_s"))
      c.control.kp = positive_at(*v, "control.kp_per_s");
    if (const json* v = member(*k, "alpha"))
      c.control.lm.alpha = positive_at(*v, "control.alpha");
    if (const json* v = member(*k, "nu"))
      c.control.lm.nu = positive_at(*v, "control.nu");
    if (const json* v = member(*k, "lambda_init_nmm"))
      c.control.lm.lambda_init = num_at(*v, "control.lambda_init_nmm");
    if (const json* v = member(*k, "lambda_bounds_nmm"))
      c.control.lm.lambda_bounds = vec2_at(*v, "control.lambda_bounds_nmm");
    if (const json* v = member(*k, "dt_ctrl_s"))
      c.control.dt_ctrl = positive_at(*v, "control.dt_ctrl_s");
  }
  c.control.springs = c.dynamics.springs;
  c.control.motor_tau = c.dynamics.motor_tau;
  c.lambda0 = c.control.lm.lambda_init;

  if (const json* i = member(root, "initial")) {
    if (!i->is_object()) fail("initial", "expected an object");
    check_keys(*i, "initial", {"u_rad", "preload_nmm"});
    if (const json* v = member(*i, "u_rad")) {
      const Eigen::Vector2d u = vec2_at(*v, "initial.u_rad");
      c.u0 = MinimalCoords{u(0), u(1)};
    }
    if (const json* v = member(*i, "preload_nmm"))
      c.lambda0 = num_at(*v, "initial.preload_nmm");
  }

  if (const json* t = member(root, "timeline")) {
    if (!t->is_array()) fail("timeline", "expected an array");
    for (std::size_t i = 0; i < t->size(); ++i) {
      c.timeline.push_back(
          event_at((*t)[i], "timeline[" + std::to_string(i) + "]"));
    }
  }

  validate_config(c);
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("config file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

void validate_config(const ScenarioConfig& c) {
  const auto require = [](bool ok, const std::string& where,
                          const std::string& what) {
    if (!ok) fail(where, what);
  };

  require(std::isfinite(c.geometry.d) && c.geometry.d > 0.0, "geometry.d_mm",
          "must be positive");
  require(std::isfinite(c.geometry.alpha) && c.geometry.alpha > 0.0 &&
              c.geometry.alpha < M_PI,
          "geometry.alpha_rad", "must lie in (0, pi)");
  require(std::isfinite(c.geometry.eta), "geometry.eta_rad", "must be finite");
  require(std::isfinite(c.geometry.u_max) && c.geometry.u_max > 0.0,
          "geometry.u_max_rad", "must be positive");

  try {
    validate_dyn_params(c.dynamics);
  } catch (const std::invalid_argument& e) {
    fail("dynamics", e.what());
  }
  try {
    validate_lm_params(c.control.lm);
  } catch (const std::invalid_argument& e) {
    fail("control", e.what());
  }
  require(std::isfinite(c.control.kp) && c.control.kp > 0.0, "control.kp_per_s",
          "must be positive");
  require(std::isfinite(c.control.dt_ctrl) && c.control.dt_ctrl > 0.0,
          "control.dt_ctrl_s", "must be positive");
  for (int k = 0; k < 3; ++k) {
    const SpringParams& a = c.control.springs[k];
    const SpringParams& b = c.dynamics.springs[k];
    require(a.K == b.K && a.delta0 == b.delta0 && a.delta_max == b.delta_max,
            "control", "spring parameters must match the dynamics springs");
  }

  const double substeps = c.control.dt_ctrl / c.dynamics.dt_max;
  require(std::abs(substeps - std::round(substeps)) < 1e-9 && substeps >= 0.5,
          "control.dt_ctrl_s",
          "must be a whole multiple of the physics step dynamics.dt_s");
  require(std::isfinite(c.duration) && c.duration >= 0.0, "duration_s",
          "must be nonnegative");
  const double ticks_per_log = 1.0 / (c.log_rate * c.control.dt_ctrl);
  require(std::abs(ticks_per_log - std::round(ticks_per_log)) < 1e-9 &&
              ticks_per_log >= 0.5,
          "log_rate_hz", "must sample on controller ticks");
  require(std::isfinite(c.metrics_start) && c.metrics_start >= 0.0,
          "metrics_start_s", "must be nonnegative");

  try {
    require_in_workspace(c.u0, c.geometry);
  } catch (const std::exception& e) {
    fail("initial.u_rad", e.what());
  }
  require(std::isfinite(c.lambda0) &&
              c.lambda0 >= c.control.lm.lambda_bounds(0) &&
              c.lambda0 <= c.control.lm.lambda_bounds(1),
          "initial.preload_nmm", "must lie within control.lambda_bounds_nmm");

  double prev_t = 0.0;
  for (std::size_t i = 0; i < c.timeline.size(); ++i) {
    const TimelineEvent& e = c.timeline[i];
    const std::string where = "timeline[" + std::to_string(i) + "]";
    require(std::isfinite(e.time) && e.time >= 0.0, where + ".t_s",
            "must be nonnegative");
    require(e.time <= c.duration, where + ".t_s", "lies beyond duration_s");
    require(i == 0 || e.time >= prev_t, where + ".t_s",
            "timeline must be ordered by time");
    prev_t = e.time;
    require(std::isfinite(e.blend) && e.blend >= 0.0, where + ".blend_s",
            "must be nonnegative");
    if (e.u_ref) {
      try {
        require_in_workspace(*e.u_ref, c.geometry);
      } catch (const std::exception& ex) {
        fail(where + ".u_ref_rad", ex.what());
      }
    }
    if (e.theta_ps_ref)
      require(std::isfinite(*e.theta_ps_ref), where + ".theta_ps_ref_rad",
              "must be finite");
    require(!(e.preload_ref && e.compliance_ref), where,
            "give either a preload target or an explicit compliance, not both");
    if (e.preload_ref) {
      require(std::isfinite(*e.preload_ref) &&
                  *e.preload_ref >= c.control.lm.lambda_bounds(0) &&
                  *e.preload_ref <= c.control.lm.lambda_bounds(1),
              where + ".preload_ref_nmm",
              "must lie within control.lambda_bounds_nmm");
    }
    if (e.compliance_ref) {
      const Eigen::Matrix2d& m = *e.compliance_ref;
      require(m.allFinite(), where + ".compliance_ref_rad_per_nmm",
              "must be finite");
      require(std::abs(m(0, 1) - m(1, 0)) <= 1e-9 * std::max(1.0, m.norm()),
              where + ".compliance_ref_rad_per_nmm", "must be symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
      require(es.eigenvalues()(0) > 0.0,
              where + ".compliance_ref_rad_per_nmm",
              "must be positive definite");
    }
    require(!(e.load_mass && e.wrench), where,
            "give either a hung mass or an explicit wrench, not both");
    if (e.load_mass)
      require(std::isfinite(*e.load_mass) && *e.load_mass >= 0.0,
              where + ".load_mass_kg", "must be nonnegative");
    if (e.wrench)
      require(e.wrench->allFinite(), where + ".wrench_n_nmm", "must be finite");
    require(e.u_ref || e.theta_ps_ref || e.preload_ref || e.compliance_ref ||
                e.load_mass || e.wrench,
            where, "event changes nothing");
  }
}

std::string default_config_json() {
  json root;
  root["duration_s"] = 2.0;
  root["log_rate_hz"] = 1000.0;
  root["metrics_start_s"] = 0.5;
  root["seed"] = 0;
  root["output"] = "trajectory.csv";
  const WristGeometry geom;
  root["geometry"] = {{"d_mm", geom.d},
                      {"alpha_rad", geom.alpha},
                      {"eta_rad", geom.eta},
                      {"u_max_rad", geom.u_max}};
  root["springs"] = {{"k_nmm", 4.0}, {"delta0_rad", 0.32}, {"delta_max_rad", 3.2}};
  root["dynamics"] = {{"payload_mass_kg", 0.3},
                      {"payload_offset_mm", 100.0},
                      {"gravity_mm_s2", {9810.0, 0.0, 0.0}},
                      {"joint_damping_nmm_s", 0.5},
                      {"motor_tau_s", 0.02},
                      {"dt_s", 1e-4}};
  root["control"] = {{"kp_per_s", 40.0},
                     {"alpha", 50.0},
                     {"nu", 1e-16},
                     {"lambda_init_nmm", 1000.0},
                     {"lambda_bounds_nmm", {-35000.0, 35000.0}},
                     {"dt_ctrl_s", 1e-3}};
  root["initial"] = {{"u_rad", {0.0, 0.0}}, {"preload_nmm", 1000.0}};
  root["timeline"] = json::array(
      {{{"t_s", 0.0}, {"u_ref_rad", {0.3, 0.3}}, {"blend_s", 0.4}},
       {{"t_s", 0.0}, {"preload_ref_nmm", 1000.0}},
       {{"t_s", 0.5}, {"load_mass_kg", 1.5}},
       {{"t_s", 1.0}, {"u_ref_rad", {-0.3, -0.3}}, {"blend_s", 0.4}},
       {{"t_s", 1.0}, {"preload_ref_nmm", 1000.0}}});
  return root.dump(2) + "\n";
}

}  // namespace vswrist
