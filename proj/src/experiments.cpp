#include "wafersim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "wafersim/format.hpp"
#include "wafersim/metrics.hpp"
#include "wafersim/record_io.hpp"
#include "wafersim/surfaces.hpp"
#include "wafersim/sweep.hpp"

namespace wafersim {

namespace {

const std::vector<std::pair<ExperimentKind, std::string_view>> kKindNames = {
    {ExperimentKind::SurfaceCompare, "surface-compare"},
    {ExperimentKind::AccelStudy, "accel-study"},
    {ExperimentKind::ScanStudy, "scan-study"},
    {ExperimentKind::Case1, "case1"},
    {ExperimentKind::Case2, "case2"},
    {ExperimentKind::Sweep, "sweep"},
    {ExperimentKind::Gains, "gains"},
    {ExperimentKind::Bound, "bound"},
    {ExperimentKind::Containment, "containment"},
};

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw std::invalid_argument("unknown experiment '" + std::string(name) + "'");
}

const std::vector<ExperimentKind>& all_experiment_kinds() {
  static const std::vector<ExperimentKind> kinds = [] {
    std::vector<ExperimentKind> out;
    for (const auto& [k, name] : kKindNames) out.push_back(k);
    return out;
  }();
  return kinds;
}

bool ExperimentOutput::checks_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const Check* ExperimentOutput::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

bool is_compare(ExperimentKind k) {
  return k == ExperimentKind::AccelStudy || k == ExperimentKind::ScanStudy || k == ExperimentKind::Case1 ||
         k == ExperimentKind::Case2;
}

// ---------------------------------------------------------------------------
// presets

Json affine(double c1, double c0, double d1, double d0) {
  return {{"mode", "affine"}, {"c1", c1}, {"c0", c0}, {"d1", d1}, {"d0", d0}};
}

Json constant(double h1, double h2) { return {{"mode", "constant"}, {"h1", h1}, {"h2", h2}}; }

Json surface(double k1, double k2) { return {{"k1", k1}, {"k2", k2}, {"xi", 0.5}, {"a", 0.5}}; }

// Uncertain plant against the nominal model used by every controller.
SimConfig stage_model() {
  SimConfig c;
  c.plant.K = 3.9124;
  c.plant.T_v = 1.092;
  c.plant.K_bar = 4.0;
  c.plant.T_v_bar = 1.0;
  c.noise.power = 1e-20;  // 0.1 nm standard deviation
  c.noise.cutoff = 2000.0;
  c.disturbance.constant = 0.02;
  c.disturbance.ripple_amplitude = 0.05;
  c.disturbance.ripple_period = 0.016;
  c.disturbance.friction_residual = 0.01;
  return c;
}

Json base_json(const SimConfig& c) {
  Json j = to_json(c);
  j.erase("controller");
  j.erase("seed");
  j.erase("label");
  return j;
}

// Table of controller gains for the acceleration study.
Json table_gains() {
  return {
      {"CGSTA", {{"surface", surface(0.0, 1200.0)}, {"gains", constant(1500.0, 10.0)}}},
      {"VGSTA", {{"surface", surface(0.0, 1200.0)}, {"gains", affine(0.1, 50.0, 0.1, 10.0)}, {"h3", 38.0}}},
      {"IFVSTA", {{"surface", surface(53.0, 1200.0)}, {"gains", affine(0.1, 50.0, 0.1, 10.0)}}},
      {"PFVSTA", {{"surface", surface(53.0, 1200.0)}, {"gains", affine(0.1, 50.0, 0.1, 10.0)}}},
  };
}

Json scan_gains() {
  return {
      {"CGSTA", {{"surface", surface(0.0, 1200.0)}, {"gains", constant(1500.0, 80.0)}}},
      {"VGSTA", {{"surface", surface(0.0, 1200.0)}, {"gains", affine(0.5, 50.0, 0.1, 20.0)}, {"h3", 43.0}}},
      {"VGPID", Json::object()},
      {"IFVSTA", {{"surface", surface(33.0, 1e4)}, {"gains", affine(0.01, 40.0, 0.01, 20.0)}}},
      {"PFVSTA", {{"surface", surface(33.0, 1e4)}, {"gains", affine(0.01, 40.0, 0.01, 20.0)}}},
  };
}

Json case_gains() {
  return {
      {"LVGSTA", {{"surface", surface(0.0, 1200.0)}, {"gains", affine(0.5, 50.0, 0.1, 20.0)}, {"h3", 43.0}}},
      {"FCGSTA", {{"surface", surface(53.0, 1200.0)}, {"gains", constant(50.0, 20.0)}, {"h3", 43.0}}},
      {"IFVSTA", {{"surface", surface(100.0, 2e7)}, {"gains", affine(550.0, 13.0, 10.0, 4.0)}}},
      {"PFVSTA", {{"surface", surface(100.0, 2e7)}, {"gains", affine(550.0, 13.0, 10.0, 4.0)}}},
  };
}

Json accel_study_preset() {
  SimConfig c = stage_model();
  PulseProfileSpec p;
  p.duration = 1.2;
  // low pair, pause, high pair, pause: each pair returns the stage to rest
  p.pulses = {{0.10, 0.10, 1.5, 0.005}, {0.25, 0.10, -1.5, 0.005},
              {0.55, 0.05, 10.0, 0.005}, {0.65, 0.05, -10.0, 0.005}};
  c.trajectory = p;
  return {{"experiment", "accel-study"},
          {"seed", 1},
          {"controllers", {"CGSTA", "VGSTA", "IFVSTA", "PFVSTA"}},
          {"base", base_json(c)},
          {"controller_specs", table_gains()},
          {"ratio_target", 0.95},
          {"threads", 0},
          {"analysis", {{"high_fraction", 0.5}, {"settle_guard", 0.05}}}};
}

Json scan_study_preset() {
  SimConfig c = stage_model();
  ScanProfileSpec s;
  s.scan_length = 0.05;
  s.scan_velocity = 0.1;
  s.idle_time = 0.2;
  s.accel_time = 0.012;
  s.max_accel = 10.0;
  s.hold_time = 0.1;
  s.start_position = 0.21;
  s.shape = AccelShape::SCurve;
  c.trajectory = s;
  c.disturbance.step_amplitude = 0.1;
  c.disturbance.step_trigger_position = 0.23;
  return {{"experiment", "scan-study"},
          {"seed", 1},
          {"controllers", {"CGSTA", "VGSTA", "VGPID", "IFVSTA", "PFVSTA"}},
          {"base", base_json(c)},
          {"controller_specs", scan_gains()},
          {"ratio_target", 0.95},
          {"threads", 0},
          {"analysis", {{"post_window", 0.1}, {"decay_fraction", 0.1}, {"smoothing", 0.001}}}};
}

Json case_preset(int which) {
  SimConfig c = stage_model();
  ScanProfileSpec s;
  s.scan_length = 0.05;
  s.scan_velocity = 0.1;
  s.idle_time = 0.2;
  s.hold_time = 0.1;
  s.max_accel = which == 1 ? 1.5 : 10.0;
  s.return_scan = true;
  s.final_idle_time = 0.1;
  c.trajectory = s;
  return {{"experiment", which == 1 ? "case1" : "case2"},
          {"seed", 1},
          {"controllers", {"LVGSTA", "FCGSTA", "IFVSTA", "PFVSTA"}},
          {"base", base_json(c)},
          {"controller_specs", case_gains()},
          {"ratio_target", 0.95},
          {"threads", 0},
          {"analysis", Json::object()}};
}

Json sweep_preset() {
  SimConfig c = stage_model();
  ScanProfileSpec s;
  s.return_scan = true;
  s.final_idle_time = 0.1;
  c.trajectory = s;
  c.controller = default_controller(ControllerFamily::PFVSTA);
  apply_json(case_gains()["PFVSTA"], c.controller);
  Json base = to_json(c);
  base.erase("seed");
  base.erase("label");
  return {{"experiment", "sweep"},
          {"seed", 1},
          {"base", base},
          {"axes", Json::array({{{"path", "trajectory.max_accel"}, {"values", {1.5, 10.0}}}})},
          {"ratio_target", 0.95},
          {"threads", 0}};
}

Json containment_preset() {
  SimConfig c;  // nominal plant: K = K_bar, T_v = T_v_bar
  c.disturbance.constant = 0.02;
  c.disturbance.ripple_amplitude = 0.02;
  c.noise.power = 0.0;
  ScanProfileSpec s;
  s.max_accel = 1.5;
  s.return_scan = true;
  s.final_idle_time = 0.1;
  c.trajectory = s;
  // starts on the reference with a velocity error, so s begins well outside the region
  c.initial_error = 0.0;
  c.initial_velocity = 0.5;
  c.probes.lyapunov = true;
  c.controller = default_controller(ControllerFamily::PFVSTA);
  c.controller.surface.k1 = 53.0;
  c.controller.surface.k2 = 1200.0;
  TheoremGainParams p;
  p.D2 = 2.0;
  p.D4 = 0.0;
  p.gamma = 0.02;
  c.controller.gains = GainSchedule::theorem(p, PhiForm::VariablePower);
  Json base = to_json(c);
  base.erase("seed");
  base.erase("label");
  return {{"experiment", "containment"}, {"seed", 1}, {"base", base}, {"min_decrease_fraction", 0.99}};
}

}  // namespace

Json preset(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::SurfaceCompare:
      return {{"experiment", "surface-compare"},
              {"seed", 1},
              {"surface", {{"k1", 8.0}, {"k2", 500.0}, {"xi", 0.5}, {"a", 0.5}, {"memory_seconds", 2.0}}},
              {"s_value", 1.0},
              {"e0", 0.0},
              {"step", 1e-4},
              {"duration", 2.0},
              {"probe_time", 1.45},
              {"band_fraction", 0.05}};
    case ExperimentKind::AccelStudy: return accel_study_preset();
    case ExperimentKind::ScanStudy: return scan_study_preset();
    case ExperimentKind::Case1: return case_preset(1);
    case ExperimentKind::Case2: return case_preset(2);
    case ExperimentKind::Sweep: return sweep_preset();
    case ExperimentKind::Gains:
      return {{"experiment", "gains"},
              {"seed", 1},
              {"mode", "theorem"},
              {"theorem", {{"p1", 2.0}, {"p2", -1.0}, {"p4", 1.0}, {"D1", 0.0}, {"D2", 0.1}, {"D3", 0.01},
                           {"D4", 0.0}, {"gamma", 0.01}}},
              {"phi_form", "PFVSTA"},
              {"h3", 0.0},
              {"v_dot", {0.0, 1.5, 10.0}},
              {"delta", nullptr}};
    case ExperimentKind::Bound:
      return {{"experiment", "bound"}, {"seed", 1}, {"k1", 8.0}, {"k2", 500.0}, {"a", 0.5}, {"kappa", 1.0},
              {"gamma", 1.0}};
    case ExperimentKind::Containment: return containment_preset();
  }
  return {};
}

namespace {

void merge_into(Json& target, const Json& patch) {
  if (!patch.is_object() || !target.is_object()) {
    target = patch;
    return;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (target.contains(it.key()) && target[it.key()].is_object() && it.value().is_object()) {
      merge_into(target[it.key()], it.value());
    } else {
      target[it.key()] = it.value();
    }
  }
}

void require_keys(const Json& j, const std::set<std::string>& allowed, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + (path.empty() ? "" : path + ".") + it.key() + "'");
  }
}

bool non_negative_integer(const Json& j) {
  return j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
}

double num(const Json& j, const std::string& key) {
  if (!j.contains(key) || !j[key].is_number()) throw ConfigError(key + ": expected a number");
  return j[key].get<double>();
}

ControllerSpec controller_for(const std::string& label, const Json& specs) {
  ControllerSpec spec = default_controller(controller_family_from_string(label));
  if (specs.contains(label)) apply_json(specs[label], spec, "controller_specs." + label);
  return spec;
}

SimConfig parse_base(const Json& cfg) {
  if (cfg["base"].contains("seed") || cfg["base"].contains("label")) {
    throw ConfigError("base: seed and label are set at the top level");
  }
  SimConfig c = sim_config_from_json(cfg["base"]);
  c.seed = cfg["seed"].get<std::uint64_t>();
  return c;
}

}  // namespace

Json effective_config(ExperimentKind kind, const Json& user, const Overrides& overrides) {
  if (!user.is_object()) throw ConfigError("config: expected an object at the top level");
  if (user.contains("experiment") && user["experiment"] != std::string(to_string(kind))) {
    throw ConfigError("config is for experiment " + user["experiment"].dump() + ", not " + std::string(to_string(kind)));
  }
  Json j = preset(kind);
  std::set<std::string> allowed;
  for (auto it = j.begin(); it != j.end(); ++it) allowed.insert(it.key());
  require_keys(user, allowed, "");
  merge_into(j, user);
  if (overrides.seed) j["seed"] = *overrides.seed;
  if (overrides.controllers) {
    if (!is_compare(kind)) throw ConfigError("--controllers applies to accel-study, scan-study, case1 and case2");
    j["controllers"] = *overrides.controllers;
  }
  if (!non_negative_integer(j["seed"])) throw ConfigError("seed: expected a non-negative integer");

  if (is_compare(kind)) {
    if (j["base"].contains("controller")) throw ConfigError("base.controller: use controller_specs and controllers");
    SimConfig base = parse_base(j);
    base.validate();
    j["base"] = base_json(base);
    if (!j["controllers"].is_array() || j["controllers"].empty()) throw ConfigError("controllers: expected a non-empty list");
    std::set<std::string> seen;
    for (const auto& name : j["controllers"]) {
      if (!name.is_string()) throw ConfigError("controllers: expected names");
      if (!seen.insert(name.get<std::string>()).second) throw ConfigError("controllers: duplicate " + name.dump());
      controller_family_from_string(name.get<std::string>());
    }
    Json specs = Json::object();
    if (!j["controller_specs"].is_object()) throw ConfigError("controller_specs: expected an object");
    for (auto it = j["controller_specs"].begin(); it != j["controller_specs"].end(); ++it) {
      ControllerSpec spec = controller_for(it.key(), j["controller_specs"]);
      spec.K_bar = base.plant.K_bar;
      spec.T_v_bar = base.plant.T_v_bar;
      spec.validate();
      specs[it.key()] = to_json(spec);
    }
    for (const auto& name : j["controllers"]) {
      if (!specs.contains(name.get<std::string>())) {
        specs[name.get<std::string>()] = to_json(default_controller(controller_family_from_string(name.get<std::string>())));
      }
    }
    j["controller_specs"] = specs;
    double rt = num(j, "ratio_target");
    if (!(rt > 0.0 && rt <= 1.0)) throw ConfigError("ratio_target: must lie in (0, 1]");
    if (!non_negative_integer(j["threads"])) throw ConfigError("threads: expected a non-negative integer");
    const Json defaults = preset(kind)["analysis"];
    std::set<std::string> keys;
    for (auto it = defaults.begin(); it != defaults.end(); ++it) keys.insert(it.key());
    require_keys(j["analysis"], keys, "analysis");
    for (auto it = j["analysis"].begin(); it != j["analysis"].end(); ++it) {
      if (!it.value().is_number()) throw ConfigError("analysis." + it.key() + ": expected a number");
    }
  } else if (kind == ExperimentKind::Sweep || kind == ExperimentKind::Containment) {
    SimConfig base = parse_base(j);
    base.validate();
    Json b = to_json(base);
    b.erase("seed");
    b.erase("label");
    j["base"] = b;
    if (kind == ExperimentKind::Sweep) {
      if (!j["axes"].is_array()) throw ConfigError("axes: expected a list");
      for (std::size_t i = 0; i < j["axes"].size(); ++i) {
        const Json& axis = j["axes"][i];
        const std::string path = "axes[" + std::to_string(i) + "]";
        require_keys(axis, {"path", "values"}, path);
        if (!axis.contains("path") || !axis["path"].is_string()) throw ConfigError(path + ".path: expected a string");
        if (!axis.contains("values") || !axis["values"].is_array() || axis["values"].empty()) {
          throw ConfigError(path + ".values: expected a non-empty list");
        }
      }
      if (!non_negative_integer(j["threads"])) throw ConfigError("threads: expected a non-negative integer");
      num(j, "ratio_target");
    } else {
      if (base.controller.gains.mode() != GainSchedule::Mode::Theorem) {
        throw ConfigError("containment: base.controller.gains must use theorem mode");
      }
      num(j, "min_decrease_fraction");
    }
  } else if (kind == ExperimentKind::SurfaceCompare) {
    require_keys(j["surface"], {"k1", "k2", "xi", "a", "memory_seconds"}, "surface");
    SurfaceSpec spec;
    spec.k1 = num(j["surface"], "k1");
    spec.k2 = num(j["surface"], "k2");
    spec.xi = num(j["surface"], "xi");
    spec.a = num(j["surface"], "a");
    spec.memory_seconds = num(j["surface"], "memory_seconds");
    spec.validate();
    for (const char* key : {"s_value", "e0", "step", "duration", "probe_time", "band_fraction"}) num(j, key);
    if (!(num(j, "step") > 0.0) || !(num(j, "duration") > 0.0)) throw ConfigError("step and duration must be positive");
  } else if (kind == ExperimentKind::Gains) {
    const std::string mode = j["mode"].is_string() ? j["mode"].get<std::string>() : "";
    if (mode != "theorem" && mode != "affine") throw ConfigError("mode: expected theorem or affine");
    require_keys(j["theorem"], {"p1", "p2", "p4", "D1", "D2", "D3", "D4", "gamma"}, "theorem");
    if (!j["v_dot"].is_array()) throw ConfigError("v_dot: expected a list");
    for (const auto& v : j["v_dot"]) {
      if (!v.is_number()) throw ConfigError("v_dot: expected numbers");
    }
    controller_family_from_string(j["phi_form"].get<std::string>());
    num(j, "h3");
    if (!j["delta"].is_null()) require_keys(j["delta"], {"delta1", "delta2"}, "delta");
  } else if (kind == ExperimentKind::Bound) {
    for (const char* key : {"k1", "k2", "a", "kappa", "gamma"}) num(j, key);
  }
  return j;
}

namespace {

std::string sci(double x, int digits = 4) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(digits) << x;
  return os.str();
}

std::string checks_text(const std::vector<Check>& checks) {
  std::string out;
  for (const auto& c : checks) out += std::string(c.passed ? "PASS " : "FAIL ") + c.name + ": " + c.detail + "\n";
  return out;
}

// Index of the unique extreme; nullopt when a value is missing.
template <class Better>
std::optional<std::size_t> extreme(const std::vector<std::optional<double>>& xs, Better better) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!xs[i]) return std::nullopt;
    if (!best || better(*xs[i], *xs[*best])) best = i;
  }
  return best;
}

Check extreme_check(const std::string& name, const std::vector<std::string>& labels,
                    const std::vector<std::optional<double>>& values, const std::string& want, bool smallest) {
  Check c{name, false, ""};
  auto idx = smallest ? extreme(values, std::less<double>{}) : extreme(values, std::greater<double>{});
  std::string listing;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    listing += (i ? ", " : "") + labels[i] + "=" + (values[i] ? sci(*values[i], 3) : std::string("n/a"));
  }
  if (std::find(labels.begin(), labels.end(), want) == labels.end()) {
    c.detail = want + " not in the controller set; " + listing;
    return c;
  }
  if (!idx) {
    c.detail = "missing values; " + listing;
    return c;
  }
  // strict: ties do not count
  bool strict = true;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i != *idx && *values[i] == *values[*idx]) strict = false;
  }
  c.passed = labels[*idx] == want && strict;
  c.detail = listing;
  return c;
}

struct Compared {
  std::string label;
  RunOutcome outcome;
};

std::vector<Compared> run_controllers(const Json& cfg, bool without_step = false) {
  SimConfig base = parse_base(cfg);
  if (without_step) base.disturbance.step_amplitude = 0.0;
  std::vector<SimConfig> configs;
  std::vector<std::string> labels;
  for (const auto& name : cfg["controllers"]) {
    const std::string label = name.get<std::string>();
    SimConfig c = base;
    c.controller = controller_for(label, cfg["controller_specs"]);
    c.controller.K_bar = c.plant.K_bar;
    c.controller.T_v_bar = c.plant.T_v_bar;
    c.label = label;
    configs.push_back(std::move(c));
    labels.push_back(label);
  }
  auto outcomes = run_many(configs, cfg["threads"].get<unsigned>());
  std::vector<Compared> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out.push_back({labels[i], std::move(outcomes[i])});
  return out;
}

std::string run_header(const Json& cfg) {
  std::string s = "experiment: " + cfg["experiment"].get<std::string>() + "\n";
  s += "version: " + version_string() + "\n";
  s += "seed: " + cfg["seed"].dump() + "\n";
  return s;
}

void add_records(ExperimentOutput& out, const std::vector<Compared>& runs, std::string& summary) {
  for (const auto& r : runs) {
    if (!r.outcome.record) {
      out.run_failures.push_back(r.label + ": " + r.outcome.error);
      summary += "run " + r.label + ": FAILED " + r.outcome.error + "\n";
      continue;
    }
    const RunRecord& rec = *r.outcome.record;
    out.files.emplace_back(r.label + ".csv", record_csv(rec));
    summary += "run " + r.label + ": config " + rec.config_hash + ", " + std::to_string(rec.size()) + " samples";
    if (rec.aborted) {
      out.run_failures.push_back(r.label + ": aborted at sample " + std::to_string(rec.abort_index.value_or(0)) +
                                 ": " + rec.abort_reason);
      summary += ", ABORTED at sample " + std::to_string(rec.abort_index.value_or(0)) + " (" + rec.abort_reason + ")";
    }
    summary += "\n";
  }
}

std::vector<MetricsReport> reports_for(const std::vector<Compared>& runs, double ratio_target) {
  std::vector<MetricsReport> reports;
  for (const auto& r : runs) {
    if (!r.outcome.record) {
      MetricsReport empty;
      empty.label = r.label;
      reports.push_back(empty);
      continue;
    }
    reports.push_back(full_report(*r.outcome.record, ratio_target));
  }
  return reports;
}

void add_table(ExperimentOutput& out, const std::vector<MetricsReport>& reports, std::string& summary) {
  const ComparisonTable table = comparison_table(reports);
  out.files.emplace_back("comparison.csv", table.csv);
  out.files.emplace_back("comparison.txt", table.text);
  summary += "\n" + table.text;
}

std::vector<std::string> labels_of(const std::vector<Compared>& runs) {
  std::vector<std::string> labels;
  for (const auto& r : runs) labels.push_back(r.label);
  return labels;
}

bool usable(const Compared& r) { return r.outcome.record && !r.outcome.record->aborted; }

// Index of the controller named `family` in either spelling of the label.
bool same_controller(const std::string& label, const std::string& want) {
  return label == want || (want == "VGSTA" && label == "LVGSTA") || (want == "LVGSTA" && label == "VGSTA");
}

ExperimentOutput run_accel_study(const Json& cfg) {
  ExperimentOutput out;
  auto runs = run_controllers(cfg);
  std::string summary = run_header(cfg);
  add_records(out, runs, summary);
  auto reports = reports_for(runs, cfg["ratio_target"].get<double>());
  add_table(out, reports, summary);

  const double high_fraction = cfg["analysis"]["high_fraction"].get<double>();
  const double guard = cfg["analysis"]["settle_guard"].get<double>();
  std::vector<std::optional<double>> overall;
  summary += "\nacceleration windows (high: |r_ddot| >= " + number(high_fraction) + " max|r_ddot|; zero: r_ddot = 0 at least " +
             number(guard) + " s after the last acceleration)\n";
  for (const auto& r : runs) {
    if (!usable(r)) {
      overall.push_back(std::nullopt);
      out.checks.push_back({"error grows with acceleration [" + r.label + "]", false, "run unavailable"});
      continue;
    }
    const RunRecord& rec = *r.outcome.record;
    const double peak_acc = max_abs(rec.r_ddot);
    double high = 0.0, zero = 0.0;
    double last_event = 0.0;  // run start or last sample with nonzero r_ddot
    for (std::size_t k = 0; k < rec.size(); ++k) {
      const double a = std::abs(rec.r_ddot[k]);
      if (a >= high_fraction * peak_acc && a > 0.0) high = std::max(high, std::abs(rec.e[k]));
      if (a != 0.0) {
        last_event = rec.t[k];
      } else if (rec.t[k] - last_event >= guard) {
        zero = std::max(zero, std::abs(rec.e[k]));
      }
    }
    overall.push_back(max_abs(rec.e));
    summary += "  " + r.label + ": high-accel max|e| " + sci(high, 3) + ", zero-accel max|e| " + sci(zero, 3) + "\n";
    out.checks.push_back({"error grows with acceleration [" + r.label + "]", high > zero,
                          "high " + sci(high, 3) + " vs zero " + sci(zero, 3)});
  }
  out.checks.push_back(extreme_check("PFVSTA smallest overall max|e|", labels_of(runs), overall, "PFVSTA", true));
  summary += "\n" + checks_text(out.checks);
  out.summary = summary;
  out.files.emplace_back("summary.txt", summary);
  return out;
}

// Disturbance-induced deviation: the run minus its step-free twin, smoothed by
// a centred moving average to strip the discrete-time limit cycle.
struct Deviation {
  double raw_peak = 0.0;
  double smooth_peak = 0.0;
  std::optional<double> decay_time;
};

Deviation disturbance_deviation(const RunRecord& rec, const RunRecord& twin, std::size_t begin, std::size_t end,
                                std::size_t half_width, double decay_fraction) {
  Deviation out;
  end = std::min({end, rec.size(), twin.size()});
  if (begin >= end) return out;
  std::vector<double> d(end - begin), sm(end - begin);
  for (std::size_t k = begin; k < end; ++k) d[k - begin] = rec.e[k] - twin.e[k];
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t lo = i >= half_width ? i - half_width : 0;
    const std::size_t hi = std::min(d.size(), i + half_width + 1);
    sm[i] = std::accumulate(d.begin() + static_cast<std::ptrdiff_t>(lo), d.begin() + static_cast<std::ptrdiff_t>(hi),
                            0.0) /
            static_cast<double>(hi - lo);
  }
  out.raw_peak = max_abs(d);
  std::size_t at = 0;
  for (std::size_t i = 0; i < sm.size(); ++i) {
    if (std::abs(sm[i]) > std::abs(sm[at])) at = i;
  }
  out.smooth_peak = std::abs(sm[at]);
  std::size_t last_above = at;
  for (std::size_t i = at; i < sm.size(); ++i) {
    if (std::abs(sm[i]) > decay_fraction * out.smooth_peak) last_above = i;
  }
  if (last_above + 1 < sm.size()) out.decay_time = static_cast<double>(last_above + 1 - at) * rec.step;
  return out;
}

ExperimentOutput run_scan_study(const Json& cfg) {
  ExperimentOutput out;
  auto runs = run_controllers(cfg);
  auto twins = run_controllers(cfg, true);
  std::string summary = run_header(cfg);
  add_records(out, runs, summary);
  auto reports = reports_for(runs, cfg["ratio_target"].get<double>());
  add_table(out, reports, summary);

  const double window = cfg["analysis"]["post_window"].get<double>();
  const double decay_fraction = cfg["analysis"]["decay_fraction"].get<double>();
  const double smoothing = cfg["analysis"]["smoothing"].get<double>();
  std::vector<std::optional<double>> ad_max, post_max, decay;
  summary += "\nstep disturbance, window " + number(window) + " s after the trigger\n";
  summary += "  post max|e|: raw error; deviation: run minus its step-free twin, " + number(smoothing) +
             " s moving average; decay: deviation peak to " + number(decay_fraction) + " of it\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    ad_max.push_back(usable(r) && reports[i][Phase::AD] ? std::optional<double>(reports[i][Phase::AD]->max)
                                                        : std::nullopt);
    if (!usable(r) || !usable(twins[i]) || !r.outcome.record->step_trigger_index) {
      post_max.push_back(std::nullopt);
      decay.push_back(std::nullopt);
      summary += "  " + r.label + ": no disturbance response\n";
      continue;
    }
    const RunRecord& rec = *r.outcome.record;
    const std::size_t begin = *rec.step_trigger_index;
    const std::size_t end = begin + static_cast<std::size_t>(std::llround(window / rec.step));
    double peak = 0.0;
    for (std::size_t k = begin; k < std::min(end, rec.size()); ++k) peak = std::max(peak, std::abs(rec.e[k]));
    post_max.push_back(peak);
    const auto half = static_cast<std::size_t>(std::llround(0.5 * smoothing / rec.step));
    const Deviation dev = disturbance_deviation(rec, *twins[i].outcome.record, begin, end, half, decay_fraction);
    // a deviation that never decays inside the window counts as the full window
    decay.push_back(dev.decay_time.value_or(window));
    summary += "  " + r.label + ": trigger t=" + number(rec.t[begin]) + " s, post max|e| " + sci(peak, 3) +
               ", deviation " + sci(dev.raw_peak, 3) + " (smoothed " + sci(dev.smooth_peak, 3) + "), decay " +
               (dev.decay_time ? number(*dev.decay_time) + " s" : std::string(">= window")) + "\n";

    std::string junction;
    for (auto [b, e] : phase_segments(rec.phase, Phase::SP)) {
      std::size_t at = b;
      for (std::size_t k = b; k < e; ++k) {
        if (std::abs(rec.e[k]) > std::abs(rec.e[at])) at = k;
      }
      junction += " " + number(static_cast<double>(at - b) / static_cast<double>(e - b));
    }
    summary += "    SP max|e| position (fraction of scan):" + junction + "\n";
  }
  const auto labels = labels_of(runs);
  out.checks.push_back(extreme_check("CGSTA largest AD max|e|", labels, ad_max, "CGSTA", false));
  out.checks.push_back(extreme_check("PFVSTA smallest post-disturbance max|e|", labels, post_max, "PFVSTA", true));
  auto idx = [&](const std::string& want) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (same_controller(labels[i], want)) return i;
    }
    return std::nullopt;
  };
  for (const std::string other : {"CGSTA", "VGSTA"}) {
    Check c{"VGPID decays slower than " + other, false, ""};
    const auto p = idx("VGPID"), o = idx(other);
    if (p && o && decay[*p] && decay[*o]) {
      c.passed = *decay[*p] > *decay[*o];
      c.detail = "VGPID " + number(*decay[*p]) + " s vs " + other + " " + number(*decay[*o]) + " s";
    } else {
      c.detail = "controller missing or run failed";
    }
    out.checks.push_back(c);
  }
  summary += "\n" + checks_text(out.checks);
  out.summary = summary;
  out.files.emplace_back("summary.txt", summary);
  return out;
}

ExperimentOutput run_case(const Json& cfg, int which) {
  ExperimentOutput out;
  auto runs = run_controllers(cfg);
  std::string summary = run_header(cfg);
  add_records(out, runs, summary);
  const double ratio_target = cfg["ratio_target"].get<double>();
  auto reports = reports_for(runs, ratio_target);
  add_table(out, reports, summary);
  summary += "valid-scan ratio target: " + number(ratio_target) + "\n";

  const auto labels = labels_of(runs);
  std::vector<std::optional<double>> sp_rms, peak;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    sp_rms.push_back(usable(runs[i]) && reports[i][Phase::SP] ? std::optional<double>(reports[i][Phase::SP]->rms)
                                                               : std::nullopt);
    peak.push_back(usable(runs[i]) ? std::optional<double>(max_abs(runs[i].outcome.record->e)) : std::nullopt);
  }
  out.checks.push_back(extreme_check("PFVSTA smallest SP RMS", labels, sp_rms, "PFVSTA", true));
  {
    Check c{"PFVSTA tp/ts >= 0.97", false, "PFVSTA not run"};
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (labels[i] != "PFVSTA") continue;
      if (usable(runs[i]) && reports[i].scan) {
        c.passed = reports[i].scan->tp_over_ts >= 0.97;
        c.detail = "tp/ts = " + number(reports[i].scan->tp_over_ts) + " at e_s = " + sci(reports[i].scan->e_s, 3);
      } else {
        c.detail = "run failed";
      }
    }
    out.checks.push_back(c);
  }
  if (which == 2) out.checks.push_back(extreme_check("IFVSTA largest peak error", labels, peak, "IFVSTA", false));
  summary += "\n" + checks_text(out.checks);
  out.summary = summary;
  out.files.emplace_back("summary.txt", summary);
  return out;
}

ExperimentOutput run_sweep(const Json& cfg) {
  ExperimentOutput out;
  const SimConfig base = parse_base(cfg);
  std::vector<SweepAxis> axes;
  for (const auto& a : cfg["axes"]) {
    SweepAxis axis;
    axis.path = a["path"].get<std::string>();
    for (const auto& v : a["values"]) axis.values.push_back(v);
    axes.push_back(std::move(axis));
  }
  auto points = sweep(base, axes, cfg["threads"].get<unsigned>());
  std::string summary = run_header(cfg);
  std::vector<MetricsReport> reports;
  std::string index = "file,params\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::ostringstream name;
    name << "run_" << std::setw(3) << std::setfill('0') << i;
    const auto& p = points[i];
    summary += name.str() + " [" + p.label + "]: ";
    if (!p.outcome.record) {
      out.run_failures.push_back(p.label + ": " + p.outcome.error);
      summary += "FAILED " + p.outcome.error + "\n";
      MetricsReport empty;
      empty.label = p.label;
      reports.push_back(empty);
      continue;
    }
    const RunRecord& rec = *p.outcome.record;
    out.files.emplace_back(name.str() + ".csv", record_csv(rec));
    index += name.str() + ".csv,\"" + p.params.dump() + "\"\n";
    summary += "config " + rec.config_hash + (rec.aborted ? ", ABORTED: " + rec.abort_reason : std::string()) + "\n";
    if (rec.aborted) out.run_failures.push_back(p.label + ": " + rec.abort_reason);
    reports.push_back(full_report(rec, cfg["ratio_target"].get<double>()));
  }
  out.files.emplace_back("index.csv", index);
  add_table(out, reports, summary);
  out.checks.push_back({"all sweep runs completed", out.run_failures.empty(),
                        std::to_string(points.size() - out.run_failures.size()) + " of " +
                            std::to_string(points.size())});
  summary += "\n" + checks_text(out.checks);
  out.summary = summary;
  out.files.emplace_back("summary.txt", summary);
  return out;
}

ExperimentOutput run_containment(const Json& cfg) {
  ExperimentOutput out;
  SimConfig c = parse_base(cfg);
  c.label = "containment";
  const RunRecord rec = run(c);
  out.files.emplace_back("containment.csv", record_csv(rec));
  std::string summary = run_header(cfg);
  summary += "run: config " + rec.config_hash + ", " + std::to_string(rec.size()) + " samples\n";
  if (rec.aborted) {
    out.run_failures.push_back("aborted: " + rec.abort_reason);
    summary += "ABORTED: " + rec.abort_reason + "\n";
  }
  const auto& tp = c.controller.gains.theorem_params();
  const double gamma = tp.gamma;
  const auto g0 = c.controller.gains.compute(0.0);
  summary += "gamma " + number(gamma) + ", h1(0) " + number(g0.h1) + ", h2(0) " + number(g0.h2) + "\n";

  const ContainmentStats cs = containment(rec, gamma);
  const LyapunovWeights w = c.probes.weights.value_or(LyapunovWeights{tp.p1, tp.p2, tp.p4});
  const LyapunovStats ls = lyapunov_probe(rec, w, gamma);
  summary += "first entry: " + (cs.first_entry ? "t=" + number(rec.t[*cs.first_entry]) + " s" : std::string("never")) +
             ", max |s| after entry " + sci(cs.max_after_entry, 3) + ", slack " + sci(cs.slack, 3) + "\n";
  summary += "Lyapunov: " + std::to_string(ls.decreasing) + " of " + std::to_string(ls.qualifying) +
             " samples with |s| > gamma decrease V; V in [" + sci(ls.min_V, 3) + ", " + sci(ls.max_V, 3) + "]\n";

  const double need = cfg["min_decrease_fraction"].get<double>();
  out.checks.push_back({"s enters the region", cs.first_entry.has_value() && !rec.aborted,
                        cs.first_entry ? "entered at sample " + std::to_string(*cs.first_entry) : "never"});
  out.checks.push_back({"s stays in the region", cs.contained(gamma) && !rec.aborted,
                        "max after entry " + sci(cs.max_after_entry, 3) + " <= " + sci(gamma + cs.slack, 3)});
  out.checks.push_back({"V decreases outside the region", ls.has_qualifying() && ls.decrease_fraction() >= need,
                        ls.has_qualifying() ? number(ls.decrease_fraction()) : std::string("no qualifying samples")});
  out.checks.push_back({"V non-negative", ls.min_V >= 0.0, "min V " + sci(ls.min_V, 3)});
  summary += "\n" + checks_text(out.checks);
  out.summary = summary;
  out.files.emplace_back("summary.txt", summary);
  return out;
}

ExperimentOutput run_surface_compare(const Json& cfg) {
  ExperimentOutput out;
  const Json& sj = cfg["surface"];
  const double s_value = cfg["s_value"].get<double>();
  const double e0 = cfg["e0"].get<double>();
  const double step = cfg["step"].get<double>();
  const double duration = cfg["duration"].get<double>();
  const double probe = cfg["probe_time"].get<double>();
  const double band = cfg["band_fraction"].get<double>();
  std::string summary = run_header(cfg);
  summary += "s = " + number(s_value) + ", e(0) = " + number(e0) + ", step " + number(step) + " s\n\n";

  std::map<SurfaceFamily, SettlingStats> stats;
  std::map<SurfaceFamily, double> at_probe;
  std::ostringstream table;
  table << std::left << std::setw(6) << "family" << std::right << std::setw(13) << "equilibrium" << std::setw(13)
        << "settling_s" << std::setw(13) << "overshoot" << std::setw(13) << "peak_dev" << std::setw(13)
        << "dist@probe" << "\n";
  for (SurfaceFamily f : {SurfaceFamily::LSS, SurfaceFamily::ISS, SurfaceFamily::FSS, SurfaceFamily::PFSS}) {
    SurfaceSpec spec;
    spec.family = f;
    spec.k1 = sj["k1"].get<double>();
    spec.k2 = sj["k2"].get<double>();
    spec.xi = sj["xi"].get<double>();
    spec.a = sj["a"].get<double>();
    spec.memory_seconds = sj["memory_seconds"].get<double>();
    const SurfaceTrace trace = simulate_surface_dynamics(spec, s_value, e0, step, duration);
    const double eq = surface_equilibrium(spec, s_value);
    const SettlingStats st = settling_stats(trace, eq, band);
    stats[f] = st;
    const auto k = std::min(trace.e.size() - 1, static_cast<std::size_t>(std::llround(probe / step)));
    at_probe[f] = std::abs(trace.e[k] - eq);

    std::string csv = "t,e\n";
    for (std::size_t i = 0; i < trace.e.size(); ++i) {
      append_number(csv, trace.t[i]);
      csv += ',';
      append_number(csv, trace.e[i]);
      csv += '\n';
    }
    out.files.emplace_back("surface_" + std::string(to_string(f)) + ".csv", csv);
    table << std::left << std::setw(6) << to_string(f) << std::right << std::setw(13) << sci(eq, 3) << std::setw(13)
          << (st.settling_time ? number(*st.settling_time) : std::string("-")) << std::setw(13)
          << sci(st.overshoot, 3) << std::setw(13) << sci(st.peak_deviation, 3) << std::setw(13)
          << sci(at_probe[f], 3) << "\n";
  }
  summary += table.str();

  auto settle = [&](SurfaceFamily f) { return stats[f].settling_time.value_or(std::numeric_limits<double>::infinity()); };
  {
    Check c{"PFSS settles fastest", true, ""};
    for (SurfaceFamily f : {SurfaceFamily::LSS, SurfaceFamily::ISS, SurfaceFamily::FSS}) {
      if (!(settle(SurfaceFamily::PFSS) < settle(f))) c.passed = false;
      c.detail += std::string(c.detail.empty() ? "" : ", ") + std::string(to_string(f)) + " " + number(settle(f));
    }
    c.detail = "PFSS " + number(settle(SurfaceFamily::PFSS)) + " vs " + c.detail;
    out.checks.push_back(c);
  }
  out.checks.push_back({"ISS overshoot exceeds PFSS",
                        stats[SurfaceFamily::ISS].overshoot > stats[SurfaceFamily::PFSS].overshoot,
                        "ISS " + sci(stats[SurfaceFamily::ISS].overshoot, 3) + " vs PFSS " +
                            sci(stats[SurfaceFamily::PFSS].overshoot, 3)});
  out.checks.push_back(
      {"PFSS closest to equilibrium at probe time",
       at_probe[SurfaceFamily::PFSS] < at_probe[SurfaceFamily::LSS] &&
           at_probe[SurfaceFamily::PFSS] < at_probe[SurfaceFamily::ISS],
       "PFSS " + sci(at_probe[SurfaceFamily::PFSS], 3) + ", LSS " + sci(at_probe[SurfaceFamily::LSS], 3) + ", ISS " +
           sci(at_probe[SurfaceFamily::ISS], 3)});
  summary += "\n" + checks_text(out.checks);
  out.summary = summary;
  out.files.emplace_back("summary.txt", summary);
  return out;
}

TheoremGainParams theorem_params(const Json& t) {
  TheoremGainParams p;
  p.p1 = num(t, "p1");
  p.p2 = num(t, "p2");
  p.p4 = num(t, "p4");
  p.D1 = num(t, "D1");
  p.D2 = num(t, "D2");
  p.D3 = num(t, "D3");
  p.D4 = num(t, "D4");
  p.gamma = num(t, "gamma");
  return p;
}

ExperimentOutput run_gains(const Json& cfg) {
  ExperimentOutput out;
  std::string summary = run_header(cfg);
  std::string csv;
  bool positive = true;
  if (cfg["mode"] == "theorem") {
    const TheoremGainParams p = theorem_params(cfg["theorem"]);
    const PhiForm form = phi_form_for(controller_family_from_string(cfg["phi_form"].get<std::string>()));
    const GainSchedule g = GainSchedule::theorem(p, form, cfg["h3"].get<double>());
    csv = "v_dot,delta1,delta2,h1,h2\n";
    summary += "theorem gains, p1 " + number(p.p1) + ", p2 " + number(p.p2) + ", p4 " + number(p.p4) + "\n";
    std::vector<std::array<double, 5>> rows;
    if (!cfg["delta"].is_null()) {
      const double d1 = num(cfg["delta"], "delta1"), d2 = num(cfg["delta"], "delta2");
      const Gains h = theorem_gains(p.p1, p.p2, p.p4, d1, d2);
      rows.push_back({std::nan(""), d1, d2, h.h1, h.h2});
    } else {
      for (const auto& v : cfg["v_dot"]) {
        const double vd = v.get<double>();
        const Gains h = g.compute(vd);
        rows.push_back({vd, g.delta1(), g.delta2(vd), h.h1, h.h2});
      }
    }
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) csv += ',';
        append_number(csv, row[i]);
      }
      csv += '\n';
      positive = positive && row[3] > 0.0 && row[4] > 0.0;
      summary += "  v_dot " + (std::isnan(row[0]) ? std::string("-") : number(row[0])) + ": delta1 " +
                 number(row[1]) + ", delta2 " + number(row[2]) + " -> h1 " + number(row[3]) + ", h2 " +
                 number(row[4]) + "\n";
    }
  } else {
    csv = "controller,v_dot,h1,h2\n";
    summary += "table defaults (affine schedules use |v_dot|)\n";
    const Json table = table_gains();
    for (auto it = table.begin(); it != table.end(); ++it) {
      ControllerSpec spec = controller_for(it.key(), table);
      for (const auto& v : cfg["v_dot"]) {
        const Gains h = spec.gains.compute(v.get<double>());
        csv += it.key() + ",";
        append_number(csv, v.get<double>());
        csv += ",";
        append_number(csv, h.h1);
        csv += ",";
        append_number(csv, h.h2);
        csv += "\n";
        positive = positive && h.h1 > 0.0 && h.h2 > 0.0;
        summary += "  " + it.key() + " v_dot " + number(v.get<double>()) + ": h1 " + number(h.h1) + ", h2 " +
                   number(h.h2) + "\n";
      }
    }
  }
  out.files.emplace_back("gains.csv", csv);
  out.checks.push_back({"gains positive", positive, positive ? "h1, h2 > 0 on every row" : "non-positive gain"});
  summary += "\n" + checks_text(out.checks);
  out.summary = summary;
  out.files.emplace_back("summary.txt", summary);
  return out;
}

ExperimentOutput run_bound(const Json& cfg) {
  ExperimentOutput out;
  const double k1 = num(cfg, "k1"), k2 = num(cfg, "k2"), a = num(cfg, "a"), kappa = num(cfg, "kappa"),
               gamma = num(cfg, "gamma");
  const ErrorBound b = error_bound_epsilon(k1, k2, a, kappa, gamma);
  std::string summary = run_header(cfg);
  summary += "k1 " + number(k1) + ", k2 " + number(k2) + ", a " + number(a) + ", kappa " + number(kappa) +
             ", gamma " + number(gamma) + "\n";
  if (b.finite) {
    const double f = k1 * kappa * std::pow(b.epsilon, a) - k2 * std::pow(b.epsilon, 1.0 / a) + gamma;
    summary += "epsilon " + number(b.epsilon) + ", f(epsilon) " + sci(f, 3) + "\n";
    const double tol = 1e-9 * k2 * std::pow(b.epsilon, 1.0 / a);
    out.checks.push_back({"root residual", std::abs(f) <= std::max(tol, 1e-300), sci(std::abs(f), 3)});
  } else {
    summary += "no finite bound: k2 <= k1 kappa with a = 1\n";
  }
  out.files.emplace_back("bound.txt", summary);
  summary += "\n" + checks_text(out.checks);
  out.summary = summary;
  out.files.emplace_back("summary.txt", summary);
  return out;
}

}  // namespace

ExperimentOutput run_experiment(const Json& cfg) {
  switch (experiment_kind_from_string(cfg.at("experiment").get<std::string>())) {
    case ExperimentKind::SurfaceCompare: return run_surface_compare(cfg);
    case ExperimentKind::AccelStudy: return run_accel_study(cfg);
    case ExperimentKind::ScanStudy: return run_scan_study(cfg);
    case ExperimentKind::Case1: return run_case(cfg, 1);
    case ExperimentKind::Case2: return run_case(cfg, 2);
    case ExperimentKind::Sweep: return run_sweep(cfg);
    case ExperimentKind::Gains: return run_gains(cfg);
    case ExperimentKind::Bound: return run_bound(cfg);
    case ExperimentKind::Containment: return run_containment(cfg);
  }
  return {};
}

void write_outputs(const ExperimentOutput& output, const Json& effective, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : output.files) write_file_atomic(dir / name, content);
  write_file_atomic(dir / "config.json", effective.dump(2) + "\n");
}

}  // namespace wafersim
