#include "wafersim/plant.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace wafersim {

PlantParams PlantParams::from_physical(const PhysicalParams& phys, double K_bar, double T_v_bar) {
  if (!(phys.mass > 0.0)) throw std::invalid_argument("plant: mass must be positive");
  PlantParams p;
  p.K = phys.force_constant / phys.mass;
  p.T_v = phys.viscous_friction / phys.mass;
  p.K_bar = K_bar;
  p.T_v_bar = T_v_bar;
  p.physical = phys;
  p.validate();
  return p;
}

void PlantParams::validate() const {
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(K) || !finite(T_v) || !finite(K_bar) || !finite(T_v_bar)) {
    throw std::invalid_argument("plant: parameters must be finite");
  }
  if (!(K > 0.0) || !(K_bar > 0.0)) throw std::invalid_argument("plant: K and K_bar must be positive");
  if (T_v < 0.0 || T_v_bar < 0.0) throw std::invalid_argument("plant: T_v must be non-negative");
  if (physical) {
    if (K != physical->force_constant / physical->mass ||
        T_v != physical->viscous_friction / physical->mass) {
      throw std::invalid_argument("plant: K and T_v must equal Q/m and K_v/m");
    }
  }
}

void DisturbanceSpec::validate() const {
  for (double x : {constant, ripple_amplitude, ripple_period, friction_residual, step_amplitude}) {
    if (!std::isfinite(x)) throw std::invalid_argument("disturbance: amplitudes must be finite");
  }
  if (ripple_amplitude != 0.0 && !(ripple_period > 0.0)) {
    throw std::invalid_argument("disturbance: ripple period must be positive");
  }
  if (step_trigger_position && !std::isfinite(*step_trigger_position)) {
    throw std::invalid_argument("disturbance: step trigger must be finite");
  }
}

void NoiseSpec::validate() const {
  if (!std::isfinite(power) || power < 0.0) throw std::invalid_argument("noise: power must be >= 0");
  if (!std::isfinite(cutoff)) throw std::invalid_argument("noise: cutoff must be finite");
}

double disturbance_at(const DisturbanceSpec& dist, const PlantState& state) {
  double d = dist.constant;
  if (dist.ripple_amplitude != 0.0) {
    d += dist.ripple_amplitude * std::sin(2.0 * std::numbers::pi * state.p / dist.ripple_period);
  }
  if (dist.friction_residual != 0.0 && state.v != 0.0) {
    d -= std::copysign(dist.friction_residual, state.v);
  }
  if (state.step_latched) d += dist.step_amplitude;
  return d;
}

namespace {

struct Deriv {
  double dp;
  double dv;
};

Deriv rhs(const PlantParams& params, const DisturbanceSpec& dist, const PlantState& s, double u) {
  return {s.v, -params.T_v * s.v + params.K * u + disturbance_at(dist, s)};
}

}  // namespace

PlantState plant_step(const PlantState& state, const PlantParams& params,
                      const DisturbanceSpec& dist, double u, double h, int substeps,
                      const PlantLimits& limits) {
  if (!(h > 0.0) || substeps < 1) {
    throw std::invalid_argument("plant_step: need h > 0 and substeps >= 1");
  }
  if (!std::isfinite(u)) throw PlantDivergence("plant_step: non-finite control input");
  const double dt = h / substeps;
  PlantState s = state;
  for (int i = 0; i < substeps; ++i) {
    auto at = [&](double dp, double dv, double frac) {
      PlantState x = s;
      x.p += dp;
      x.v += dv;
      x.t += frac * dt;
      return x;
    };
    const Deriv k1 = rhs(params, dist, s, u);
    const Deriv k2 = rhs(params, dist, at(0.5 * dt * k1.dp, 0.5 * dt * k1.dv, 0.5), u);
    const Deriv k3 = rhs(params, dist, at(0.5 * dt * k2.dp, 0.5 * dt * k2.dv, 0.5), u);
    const Deriv k4 = rhs(params, dist, at(dt * k3.dp, dt * k3.dv, 1.0), u);
    const double p_prev = s.p;
    s.p += dt / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
    s.v += dt / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
    s.t = state.t + (i + 1) * dt;
    if (!s.step_latched && dist.step_trigger_position) {
      const double trig = *dist.step_trigger_position;
      if ((p_prev - trig) * (s.p - trig) <= 0.0) s.step_latched = true;
    }
    if (!std::isfinite(s.p) || !std::isfinite(s.v) || std::abs(s.v) > limits.max_speed) {
      std::ostringstream msg;
      msg << "plant diverged at t=" << s.t << " (p=" << s.p << ", v=" << s.v << ", u=" << u << ")";
      throw PlantDivergence(msg.str());
    }
  }
  return s;
}

MeasurementChannel::MeasurementChannel(const NoiseSpec& noise, double sample_rate)
    : spec_(noise), sigma_(std::sqrt(noise.power)), rng_(noise.seed) {
  noise.validate();
  if (!(sample_rate > 0.0)) throw std::invalid_argument("measurement: sample rate must be positive");
  const double nyquist = 0.5 * sample_rate;
  if (noise.cutoff <= 0.0 || noise.cutoff >= nyquist) {
    beta_ = 1.0;
  } else {
    beta_ = 1.0 - std::exp(-2.0 * std::numbers::pi * noise.cutoff / sample_rate);
  }
}

double MeasurementChannel::measure(const PlantState& state) {
  if (sigma_ == 0.0) return state.p;
  const double white = sigma_ * normal_(rng_);
  filtered_ += beta_ * (white - filtered_);
  return state.p + filtered_;
}

}  // namespace wafersim
