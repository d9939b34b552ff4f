#include "wafersim/config.hpp"

#include <cstdint>
#include <cstdio>
#include <set>

namespace wafersim {

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Object view that records consumed keys and rejects leftovers.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError((path_.empty() ? std::string("config") : path_) + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json* take(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  void number(const std::string& key, double& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(join(path_, key) + ": expected a number");
      out = v->get<double>();
    }
  }
  void optional_number(const std::string& key, std::optional<double>& out) {
    if (const Json* v = take(key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        throw ConfigError(join(path_, key) + ": expected a number or null");
      }
    }
  }
  void integer(const std::string& key, int& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number_integer()) throw ConfigError(join(path_, key) + ": expected an integer");
      out = v->get<int>();
    }
  }
  void unsigned_integer(const std::string& key, std::uint64_t& out) {
    if (const Json* v = take(key)) {
      if (!(v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0))) throw ConfigError(join(path_, key) + ": expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const Json* v = take(key)) {
      if (!v->is_boolean()) throw ConfigError(join(path_, key) + ": expected true or false");
      out = v->get<bool>();
    }
  }
  void string(const std::string& key, std::string& out) {
    if (const Json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(join(path_, key) + ": expected a string");
      out = v->get<std::string>();
    }
  }
  std::string child(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError("unknown key '" + join(path_, it.key()) + "'");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class Parse>
auto parse_enum(const std::string& path, const std::string& text, Parse parse) {
  try {
    return parse(text);
  } catch (const std::exception& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
}

Json gains_json(const ControllerSpec& spec) {
  const GainSchedule& g = spec.gains;
  switch (g.mode()) {
    case GainSchedule::Mode::Constant:
      return {{"mode", "constant"}, {"h1", g.c0()}, {"h2", g.d0()}};
    case GainSchedule::Mode::AffineInAccel:
      return {{"mode", "affine"}, {"c1", g.c1()}, {"c0", g.c0()}, {"d1", g.d1()}, {"d0", g.d0()}};
    case GainSchedule::Mode::Theorem: {
      const auto& p = g.theorem_params();
      return {{"mode", "theorem"}, {"p1", p.p1}, {"p2", p.p2}, {"p4", p.p4}, {"D1", p.D1},
              {"D2", p.D2},        {"D3", p.D3}, {"D4", p.D4}, {"gamma", p.gamma}};
    }
  }
  return {};
}

void apply_gains(const Json& j, ControllerSpec& spec, const std::string& path) {
  Section sec(j, path);
  std::string mode;
  switch (spec.gains.mode()) {
    case GainSchedule::Mode::Constant: mode = "constant"; break;
    case GainSchedule::Mode::AffineInAccel: mode = "affine"; break;
    case GainSchedule::Mode::Theorem: mode = "theorem"; break;
  }
  const std::string previous = mode;
  sec.string("mode", mode);
  const GainSchedule& g = spec.gains;
  const bool same = mode == previous;
  try {
    if (mode == "constant") {
      double h1 = same ? g.c0() : 0.0, h2 = same ? g.d0() : 0.0;
      sec.number("h1", h1);
      sec.number("h2", h2);
      sec.finish();
      spec.gains = GainSchedule::constant(h1, h2);
    } else if (mode == "affine") {
      double c1 = same ? g.c1() : 0.0, c0 = same ? g.c0() : 0.0;
      double d1 = same ? g.d1() : 0.0, d0 = same ? g.d0() : 0.0;
      sec.number("c1", c1);
      sec.number("c0", c0);
      sec.number("d1", d1);
      sec.number("d0", d0);
      sec.finish();
      spec.gains = GainSchedule::affine(c1, c0, d1, d0);
    } else if (mode == "theorem") {
      TheoremGainParams p = same ? g.theorem_params() : TheoremGainParams{};
      sec.number("p1", p.p1);
      sec.number("p2", p.p2);
      sec.number("p4", p.p4);
      sec.number("D1", p.D1);
      sec.number("D2", p.D2);
      sec.number("D3", p.D3);
      sec.number("D4", p.D4);
      sec.number("gamma", p.gamma);
      sec.finish();
      spec.gains = GainSchedule::theorem(p, phi_form_for(spec.family), spec.h3);
    } else {
      throw ConfigError(path + ".mode: expected constant, affine or theorem");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
}

}  // namespace

ControllerSpec default_controller(ControllerFamily family) {
  ControllerSpec spec;
  spec.family = family;
  spec.surface.family = surface_family_for(family);
  spec.feedforward_enabled = family != ControllerFamily::IFVSTA;
  return spec;
}

Json to_json(const ControllerSpec& spec) {
  Json j;
  j["family"] = std::string(to_string(spec.family));
  j["surface"] = {{"k1", spec.surface.k1},
                  {"k2", spec.surface.k2},
                  {"xi", spec.surface.xi},
                  {"a", spec.surface.a},
                  {"memory_seconds", spec.surface.memory_seconds}};
  j["gains"] = gains_json(spec);
  j["h3"] = spec.h3;
  j["pid"] = {{"kp", spec.pid.kp},
              {"ki", spec.pid.ki},
              {"kd", spec.pid.kd},
              {"delta_kp_ad", spec.pid.delta_kp_ad},
              {"delta_kp_other", spec.pid.delta_kp_other}};
  j["z_limit"] = spec.z_limit ? Json(*spec.z_limit) : Json(nullptr);
  return j;
}

void apply_json(const Json& j, ControllerSpec& spec, const std::string& path) {
  Section sec(j, path);
  if (const Json* f = sec.take("family")) {
    if (!f->is_string()) throw ConfigError(path + ".family: expected a string");
    spec.family = parse_enum(path + ".family", f->get<std::string>(), controller_family_from_string);
  }
  spec.surface.family = surface_family_for(spec.family);
  spec.feedforward_enabled = spec.family != ControllerFamily::IFVSTA;
  sec.number("h3", spec.h3);
  if (const Json* s = sec.take("surface")) {
    Section ss(*s, path + ".surface");
    ss.number("k1", spec.surface.k1);
    ss.number("k2", spec.surface.k2);
    ss.number("xi", spec.surface.xi);
    ss.number("a", spec.surface.a);
    ss.number("memory_seconds", spec.surface.memory_seconds);
    ss.finish();
  }
  if (const Json* p = sec.take("pid")) {
    Section ps(*p, path + ".pid");
    ps.number("kp", spec.pid.kp);
    ps.number("ki", spec.pid.ki);
    ps.number("kd", spec.pid.kd);
    ps.number("delta_kp_ad", spec.pid.delta_kp_ad);
    ps.number("delta_kp_other", spec.pid.delta_kp_other);
    ps.finish();
  }
  sec.optional_number("z_limit", spec.z_limit);
  if (const Json* g = sec.take("gains")) {
    apply_gains(*g, spec, path + ".gains");
  } else if (spec.gains.mode() == GainSchedule::Mode::Theorem) {
    // rebuild so a changed family or h3 reaches the theorem gains
    spec.gains = GainSchedule::theorem(spec.gains.theorem_params(), phi_form_for(spec.family), spec.h3);
  }
  sec.finish();
}

Json to_json(const TrajectorySpec& spec) {
  if (const auto* s = std::get_if<ScanProfileSpec>(&spec)) {
    return {{"kind", "scan"},
            {"scan_length", s->scan_length},
            {"scan_velocity", s->scan_velocity},
            {"idle_time", s->idle_time},
            {"accel_time", s->accel_time},
            {"max_accel", s->max_accel},
            {"hold_time", s->hold_time},
            {"start_position", s->start_position},
            {"shape", s->shape == AccelShape::SCurve ? "s-curve" : "trapezoid"},
            {"return_scan", s->return_scan},
            {"final_idle_time", s->final_idle_time}};
  }
  const auto& p = std::get<PulseProfileSpec>(spec);
  Json pulses = Json::array();
  for (const auto& pulse : p.pulses) {
    pulses.push_back(
        {{"start", pulse.start}, {"duration", pulse.duration}, {"amplitude", pulse.amplitude}, {"ramp", pulse.ramp}});
  }
  return {{"kind", "pulses"}, {"pulses", pulses}, {"duration", p.duration}, {"start_position", p.start_position}};
}

void apply_json(const Json& j, TrajectorySpec& spec, const std::string& path) {
  Section sec(j, path);
  std::string kind = std::holds_alternative<ScanProfileSpec>(spec) ? "scan" : "pulses";
  sec.string("kind", kind);
  if (kind == "scan") {
    if (!std::holds_alternative<ScanProfileSpec>(spec)) spec = ScanProfileSpec{};
    auto& s = std::get<ScanProfileSpec>(spec);
    sec.number("scan_length", s.scan_length);
    sec.number("scan_velocity", s.scan_velocity);
    sec.number("idle_time", s.idle_time);
    sec.number("accel_time", s.accel_time);
    sec.number("max_accel", s.max_accel);
    sec.number("hold_time", s.hold_time);
    sec.number("start_position", s.start_position);
    std::string shape = s.shape == AccelShape::SCurve ? "s-curve" : "trapezoid";
    sec.string("shape", shape);
    if (shape == "s-curve") {
      s.shape = AccelShape::SCurve;
    } else if (shape == "trapezoid") {
      s.shape = AccelShape::Trapezoid;
    } else {
      throw ConfigError(path + ".shape: expected trapezoid or s-curve");
    }
    sec.boolean("return_scan", s.return_scan);
    sec.number("final_idle_time", s.final_idle_time);
  } else if (kind == "pulses") {
    if (!std::holds_alternative<PulseProfileSpec>(spec)) spec = PulseProfileSpec{};
    auto& p = std::get<PulseProfileSpec>(spec);
    sec.number("duration", p.duration);
    sec.number("start_position", p.start_position);
    if (const Json* list = sec.take("pulses")) {
      if (!list->is_array()) throw ConfigError(path + ".pulses: expected an array");
      p.pulses.clear();
      for (std::size_t i = 0; i < list->size(); ++i) {
        Section ps((*list)[i], path + ".pulses[" + std::to_string(i) + "]");
        AccelPulse pulse;
        ps.number("start", pulse.start);
        ps.number("duration", pulse.duration);
        ps.number("amplitude", pulse.amplitude);
        ps.number("ramp", pulse.ramp);
        ps.finish();
        p.pulses.push_back(pulse);
      }
    }
  } else {
    throw ConfigError(path + ".kind: expected scan or pulses");
  }
  sec.finish();
}

Json to_json(const SimConfig& c) {
  Json j;
  j["control_rate"] = c.control_rate;
  j["plant_substeps"] = c.plant_substeps;
  j["duration"] = c.duration ? Json(*c.duration) : Json(nullptr);
  Json plant = {{"K", c.plant.K}, {"T_v", c.plant.T_v}, {"K_bar", c.plant.K_bar}, {"T_v_bar", c.plant.T_v_bar}};
  if (c.plant.physical) {
    plant["physical"] = {{"mass", c.plant.physical->mass},
                         {"viscous_friction", c.plant.physical->viscous_friction},
                         {"force_constant", c.plant.physical->force_constant}};
  }
  j["plant"] = plant;
  j["disturbance"] = {{"constant", c.disturbance.constant},
                      {"ripple_amplitude", c.disturbance.ripple_amplitude},
                      {"ripple_period", c.disturbance.ripple_period},
                      {"friction_residual", c.disturbance.friction_residual},
                      {"step_amplitude", c.disturbance.step_amplitude},
                      {"step_trigger_position", c.disturbance.step_trigger_position
                                                    ? Json(*c.disturbance.step_trigger_position)
                                                    : Json(nullptr)}};
  j["noise"] = {{"power", c.noise.power}, {"cutoff", c.noise.cutoff}};
  j["controller"] = to_json(c.controller);
  j["trajectory"] = to_json(c.trajectory);
  j["estimator"] = {{"derivative_cutoff", c.estimator.derivative_cutoff},
                    {"vdot_source", c.estimator.vdot_source == VDotSource::Measured ? "measured" : "reference"},
                    {"vdot_cutoff", c.estimator.vdot_cutoff}};
  j["limits"] = {{"max_speed", c.limits.max_speed}};
  j["initial_error"] = c.initial_error;
  j["initial_velocity"] = c.initial_velocity;
  Json probes = {{"lyapunov", c.probes.lyapunov}};
  probes["weights"] = c.probes.weights
                          ? Json{{"p1", c.probes.weights->p1}, {"p2", c.probes.weights->p2}, {"p4", c.probes.weights->p4}}
                          : Json(nullptr);
  j["probes"] = probes;
  j["seed"] = c.seed;
  j["label"] = c.label;
  return j;
}

void apply_json(const Json& j, SimConfig& c, const std::string& path) {
  Section sec(j, path);
  sec.number("control_rate", c.control_rate);
  sec.integer("plant_substeps", c.plant_substeps);
  sec.optional_number("duration", c.duration);
  if (const Json* p = sec.take("plant")) {
    const std::string pp = sec.child("plant");
    Section ps(*p, pp);
    ps.number("K_bar", c.plant.K_bar);
    ps.number("T_v_bar", c.plant.T_v_bar);
    if (const Json* phys = ps.take("physical"); phys && !phys->is_null()) {
      if (ps.has("K") || ps.has("T_v")) throw ConfigError(pp + ": give either physical or K/T_v, not both");
      Section fs(*phys, pp + ".physical");
      PhysicalParams phy = c.plant.physical.value_or(PhysicalParams{});
      fs.number("mass", phy.mass);
      fs.number("viscous_friction", phy.viscous_friction);
      fs.number("force_constant", phy.force_constant);
      fs.finish();
      try {
        c.plant = PlantParams::from_physical(phy, c.plant.K_bar, c.plant.T_v_bar);
      } catch (const std::exception& ex) {
        throw ConfigError(pp + ".physical: " + ex.what());
      }
    } else {
      ps.number("K", c.plant.K);
      ps.number("T_v", c.plant.T_v);
      c.plant.physical.reset();
    }
    ps.finish();
  }
  if (const Json* d = sec.take("disturbance")) {
    Section ds(*d, sec.child("disturbance"));
    ds.number("constant", c.disturbance.constant);
    ds.number("ripple_amplitude", c.disturbance.ripple_amplitude);
    ds.number("ripple_period", c.disturbance.ripple_period);
    ds.number("friction_residual", c.disturbance.friction_residual);
    ds.number("step_amplitude", c.disturbance.step_amplitude);
    ds.optional_number("step_trigger_position", c.disturbance.step_trigger_position);
    ds.finish();
  }
  if (const Json* n = sec.take("noise")) {
    Section ns(*n, sec.child("noise"));
    ns.number("power", c.noise.power);
    ns.number("cutoff", c.noise.cutoff);
    ns.finish();
  }
  if (const Json* t = sec.take("trajectory")) apply_json(*t, c.trajectory, sec.child("trajectory"));
  if (const Json* e = sec.take("estimator")) {
    Section es(*e, sec.child("estimator"));
    es.number("derivative_cutoff", c.estimator.derivative_cutoff);
    std::string src = c.estimator.vdot_source == VDotSource::Measured ? "measured" : "reference";
    es.string("vdot_source", src);
    if (src == "measured") {
      c.estimator.vdot_source = VDotSource::Measured;
    } else if (src == "reference") {
      c.estimator.vdot_source = VDotSource::Reference;
    } else {
      throw ConfigError(sec.child("estimator") + ".vdot_source: expected reference or measured");
    }
    es.number("vdot_cutoff", c.estimator.vdot_cutoff);
    es.finish();
  }
  if (const Json* l = sec.take("limits")) {
    Section ls(*l, sec.child("limits"));
    ls.number("max_speed", c.limits.max_speed);
    ls.finish();
  }
  sec.number("initial_error", c.initial_error);
  sec.number("initial_velocity", c.initial_velocity);
  if (const Json* p = sec.take("probes")) {
    Section ps(*p, sec.child("probes"));
    ps.boolean("lyapunov", c.probes.lyapunov);
    if (const Json* w = ps.take("weights")) {
      if (w->is_null()) {
        c.probes.weights.reset();
      } else {
        Section ws(*w, sec.child("probes") + ".weights");
        LyapunovWeights lw = c.probes.weights.value_or(LyapunovWeights{});
        ws.number("p1", lw.p1);
        ws.number("p2", lw.p2);
        ws.number("p4", lw.p4);
        ws.finish();
        c.probes.weights = lw;
      }
    }
    ps.finish();
  }
  sec.unsigned_integer("seed", c.seed);
  sec.string("label", c.label);
  // controller last: its gains may depend on the family given alongside
  if (const Json* ctl = sec.take("controller")) apply_json(*ctl, c.controller, sec.child("controller"));
  c.controller.K_bar = c.plant.K_bar;
  c.controller.T_v_bar = c.plant.T_v_bar;
  sec.finish();
}

SimConfig sim_config_from_json(const Json& j) {
  SimConfig c;
  apply_json(j, c);
  return c;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const SimConfig& config) { return fnv1a_hex(to_json(config).dump()); }

void set_json_path(Json& j, const std::string& dotted, const Json& value) {
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("bad parameter path '" + dotted + "'");
    if (node->is_null()) *node = Json::object();
    if (!node->is_object()) throw ConfigError("parameter path '" + dotted + "' crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace wafersim
