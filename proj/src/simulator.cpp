#include "wafersim/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "wafersim/config.hpp"

#ifndef WAFERSIM_VERSION
#define WAFERSIM_VERSION "dev"
#endif

namespace wafersim {

std::string version_string() { return "wafersim " WAFERSIM_VERSION; }

void SimConfig::validate() const {
  if (!(control_rate > 0.0) || !std::isfinite(control_rate)) throw std::invalid_argument("sim: control_rate must be positive");
  if (plant_substeps < 1) throw std::invalid_argument("sim: plant_substeps must be >= 1");
  if (duration && !(*duration >= 0.0)) throw std::invalid_argument("sim: duration must be >= 0");
  if (!std::isfinite(initial_error) || !std::isfinite(initial_velocity)) {
    throw std::invalid_argument("sim: initial state must be finite");
  }
  if (estimator.derivative_cutoff < 0.0 || !(estimator.vdot_cutoff > 0.0)) {
    throw std::invalid_argument("sim: estimator cutoffs must be non-negative (vdot_cutoff positive)");
  }
  if (!(limits.max_speed > 0.0)) throw std::invalid_argument("sim: max_speed must be positive");
  plant.validate();
  disturbance.validate();
  noise.validate();
  controller.validate();
}

TrajectoryProfile build_trajectory(const TrajectorySpec& spec, double sample_rate) {
  return std::visit(
      [sample_rate](auto s) {
        s.sample_rate = sample_rate;
        if constexpr (std::is_same_v<decltype(s), ScanProfileSpec>) {
          return generate_scan(s);
        } else {
          return acceleration_pulse_profile(s);
        }
      },
      spec);
}

namespace {

// One-pole low-pass; coefficient 1 passes the input through.
struct LowPass {
  double beta = 1.0;
  double y = 0.0;
  bool primed = false;

  LowPass(double cutoff, double rate) {
    if (cutoff > 0.0 && cutoff < 0.5 * rate) beta = 1.0 - std::exp(-2.0 * std::numbers::pi * cutoff / rate);
  }
  double operator()(double x) {
    if (!primed) {
      y = x;
      primed = true;
    } else {
      y += beta * (x - y);
    }
    return y;
  }
};

void reserve_all(RunRecord& rec, std::size_t n) {
  for (auto* v : {&rec.t, &rec.r, &rec.r_ddot, &rec.p, &rec.e, &rec.v, &rec.u, &rec.s, &rec.h1, &rec.h2, &rec.V, &rec.z}) {
    v->reserve(n);
  }
  rec.phase.reserve(n);
}

}  // namespace

RunRecord run(const SimConfig& config) {
  const auto wall_start = std::chrono::steady_clock::now();
  config.validate();
  const double h = config.step();
  const TrajectoryProfile traj = build_trajectory(config.trajectory, config.control_rate);
  if (traj.size() == 0) throw std::invalid_argument("sim: empty trajectory");

  std::size_t n = traj.size();
  if (config.duration) n = static_cast<std::size_t>(std::llround(*config.duration / h)) + 1;

  RunRecord rec;
  rec.label = config.label.empty() ? std::string(to_string(config.controller.family)) : config.label;
  rec.controller = std::string(to_string(config.controller.family));
  rec.step = h;
  rec.config_hash = config_hash(config);
  rec.version = version_string();
  rec.trajectory_shape = traj.shape_note;
  rec.phi_form = phi_form_for(config.controller.family);
  rec.K_bar = config.controller.K_bar;
  rec.h3 = config.controller.h3;
  reserve_all(rec, n);

  const auto& gains = config.controller.gains;
  if (config.probes.lyapunov) {
    if (config.probes.weights) {
      rec.lyapunov_weights = config.probes.weights;
    } else if (gains.mode() == GainSchedule::Mode::Theorem) {
      const auto& tp = gains.theorem_params();
      rec.lyapunov_weights = LyapunovWeights{tp.p1, tp.p2, tp.p4};
    }
  }

  NoiseSpec noise = config.noise;
  noise.seed = config.seed;
  MeasurementChannel sensor(noise, config.control_rate);
  Controller controller(config.controller, h);
  LowPass e_dot_filter(config.estimator.derivative_cutoff, config.control_rate);
  LowPass v_filter(config.estimator.derivative_cutoff, config.control_rate);
  LowPass v_dot_filter(config.estimator.vdot_cutoff, config.control_rate);

  auto ref = [&](const std::vector<double>& xs, std::size_t k) { return xs[std::min(k, traj.size() - 1)]; };
  auto phase_at = [&](std::size_t k) { return k < traj.size() ? traj.phase[k] : Phase::IP; };

  PlantState state;
  state.p = traj.r[0] + config.initial_error;
  state.v = config.initial_velocity;
  double y_prev = 0.0, e_prev = 0.0, v_prev = 0.0;

  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * h;
    const double r = ref(traj.r, k);
    const double r_dot = ref(traj.r_dot, k);
    const double r_ddot = k < traj.size() ? traj.r_ddot[k] : 0.0;
    const Phase phase = phase_at(k);

    const double y = sensor.measure(state);
    const double e_meas = y - r;
    double e_dot, v_est, v_dot;
    if (k == 0) {
      // No history yet: take the initial velocity as known.
      e_dot = e_dot_filter(config.initial_velocity - r_dot);
      v_est = v_filter(config.initial_velocity);
    } else {
      e_dot = e_dot_filter((e_meas - e_prev) / h);
      v_est = v_filter((y - y_prev) / h);
    }
    if (config.estimator.vdot_source == VDotSource::Reference) {
      v_dot = r_ddot;
    } else {
      v_dot = v_dot_filter(k == 0 ? 0.0 : (v_est - v_prev) / h);
    }
    y_prev = y;
    e_prev = e_meas;
    v_prev = v_est;

    ControlInput in{e_meas, e_dot, v_est, v_dot, r_ddot, phase};
    double u = 0.0;
    try {
      u = controller.step(in);
    } catch (const NonFiniteControl& ex) {
      rec.aborted = true;
      rec.abort_index = k;
      rec.abort_reason = std::string("controller: ") + ex.what() + " at t=" + std::to_string(t);
      break;
    }
    const auto& diag = controller.last();
    rec.t.push_back(t);
    rec.r.push_back(r);
    rec.r_ddot.push_back(r_ddot);
    rec.p.push_back(state.p);
    rec.e.push_back(state.p - r);
    rec.v.push_back(state.v);
    rec.u.push_back(u);
    rec.s.push_back(diag.s);
    rec.h1.push_back(diag.h1);
    rec.h2.push_back(diag.h2);
    const double z_theta = -config.controller.K_bar * diag.z;
    rec.z.push_back(controller.is_super_twisting() ? z_theta : std::nan(""));
    if (rec.lyapunov_weights && controller.is_super_twisting()) {
      const auto& w = *rec.lyapunov_weights;
      const double f = phi1(diag.s, rec.phi_form, config.controller.h3);
      rec.V.push_back(w.p1 * f * f + 2.0 * w.p2 * f * z_theta + w.p4 * z_theta * z_theta);
    } else {
      rec.V.push_back(std::nan(""));
    }
    rec.phase.push_back(phase);
    if (state.step_latched && !rec.step_trigger_index) rec.step_trigger_index = k;

    if (k + 1 == n) break;
    try {
      state = plant_step(state, config.plant, config.disturbance, u, h, config.plant_substeps, config.limits);
    } catch (const PlantDivergence& ex) {
      rec.aborted = true;
      rec.abort_index = k + 1;
      rec.abort_reason = ex.what();
      break;
    }
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return rec;
}

LyapunovStats lyapunov_probe(const RunRecord& record, const LyapunovWeights& w, double gamma,
                             std::size_t begin, std::size_t end) {
  LyapunovStats out;
  end = std::min(end, record.size());
  if (begin >= end) return out;
  out.V.reserve(end - begin);
  for (std::size_t k = begin; k < end; ++k) {
    const double f = phi1(record.s[k], record.phi_form, record.h3);
    const double z = record.z[k];
    out.V.push_back(w.p1 * f * f + 2.0 * w.p2 * f * z + w.p4 * z * z);
  }
  out.min_V = *std::min_element(out.V.begin(), out.V.end());
  out.max_V = *std::max_element(out.V.begin(), out.V.end());
  for (std::size_t k = begin; k + 1 < end; ++k) {
    if (std::abs(record.s[k]) <= gamma) continue;
    ++out.qualifying;
    if (out.V[k + 1 - begin] < out.V[k - begin]) ++out.decreasing;
  }
  return out;
}

ContainmentStats containment(const RunRecord& record, double gamma) {
  ContainmentStats out;
  for (std::size_t k = 0; k < record.size(); ++k) {
    if (k + 1 < record.size()) out.slack = std::max(out.slack, std::abs(record.s[k + 1] - record.s[k]));
    const double m = std::abs(record.s[k]);
    if (!out.first_entry) {
      if (m <= gamma) out.first_entry = k;
      continue;
    }
    out.max_after_entry = std::max(out.max_after_entry, m);
  }
  return out;
}

}  // namespace wafersim
