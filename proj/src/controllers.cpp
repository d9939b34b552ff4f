#include "wafersim/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wafersim {

std::string_view to_string(ControllerFamily family) {
  switch (family) {
    case ControllerFamily::CGSTA: return "CGSTA";
    case ControllerFamily::VGSTA: return "VGSTA";
    case ControllerFamily::VGPID: return "VGPID";
    case ControllerFamily::FCGSTA: return "FCGSTA";
    case ControllerFamily::IFVSTA: return "IFVSTA";
    case ControllerFamily::PFVSTA: return "PFVSTA";
  }
  return "?";
}

ControllerFamily controller_family_from_string(std::string_view name) {
  if (name == "CGSTA") return ControllerFamily::CGSTA;
  if (name == "VGSTA" || name == "LVGSTA") return ControllerFamily::VGSTA;
  if (name == "VGPID") return ControllerFamily::VGPID;
  if (name == "FCGSTA") return ControllerFamily::FCGSTA;
  if (name == "IFVSTA") return ControllerFamily::IFVSTA;
  if (name == "PFVSTA") return ControllerFamily::PFVSTA;
  throw std::invalid_argument("unknown controller family: " + std::string(name));
}

PhiForm phi_form_for(ControllerFamily family) {
  switch (family) {
    case ControllerFamily::CGSTA: return PhiForm::HalfPower;
    case ControllerFamily::VGSTA:
    case ControllerFamily::FCGSTA: return PhiForm::HalfPowerLinear;
    default: return PhiForm::VariablePower;
  }
}

SurfaceFamily surface_family_for(ControllerFamily family) {
  switch (family) {
    case ControllerFamily::CGSTA:
    case ControllerFamily::VGSTA:
    case ControllerFamily::VGPID: return SurfaceFamily::LSS;
    case ControllerFamily::FCGSTA: return SurfaceFamily::FSS;
    case ControllerFamily::IFVSTA:
    case ControllerFamily::PFVSTA: return SurfaceFamily::PFSS;
  }
  return SurfaceFamily::LSS;
}

double alpha_exponent(double s) {
  const double m = std::abs(s);
  if (std::isinf(m)) return 2.0;
  return (4.0 * m + 1.0) / (2.0 * (m + 1.0));
}

double alpha_slope(double s) {
  const double m = std::abs(s) + 1.0;
  return 1.5 / (m * m);
}

namespace {

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

// |s|^{2 alpha} ln|s| without forming 0 * -inf for tiny |s|.
double pow_log_term(double m, double two_alpha) {
  const double log_m = std::log(m);
  if (m >= 1e-12) return std::pow(m, two_alpha) * log_m;
  return -std::exp(two_alpha * log_m + std::log(-log_m));
}

}  // namespace

double phi1(double s, PhiForm form, double h3) {
  if (s == 0.0) return 0.0;
  const double m = std::abs(s);
  switch (form) {
    case PhiForm::VariablePower: return sgn(s) * std::pow(m, alpha_exponent(s));
    case PhiForm::HalfPower: return sgn(s) * std::sqrt(m);
    case PhiForm::HalfPowerLinear: return sgn(s) * std::sqrt(m) + h3 * s;
  }
  return 0.0;
}

double phi1_derivative(double s, PhiForm form, double h3) {
  const double m = std::abs(s);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  switch (form) {
    case PhiForm::VariablePower: {
      const double alpha = alpha_exponent(s);
      return std::pow(m, alpha) * (alpha / m + alpha_slope(s) * std::log(m));
    }
    case PhiForm::HalfPower: return 0.5 / std::sqrt(m);
    case PhiForm::HalfPowerLinear: return 0.5 / std::sqrt(m) + h3;
  }
  return 0.0;
}

double phi2(double s, PhiForm form, double h3) {
  if (s == 0.0) return 0.0;
  const double m = std::abs(s);
  switch (form) {
    case PhiForm::VariablePower: {
      const double alpha = alpha_exponent(s);
      const double value = alpha * std::pow(m, 2.0 * alpha - 1.0) + alpha_slope(s) * pow_log_term(m, 2.0 * alpha);
      return sgn(s) * value;
    }
    case PhiForm::HalfPower: return 0.5 * sgn(s);
    case PhiForm::HalfPowerLinear:
      return 0.5 * sgn(s) + 1.5 * h3 * sgn(s) * std::sqrt(m) + h3 * h3 * s;
  }
  return 0.0;
}

Gains theorem_gains(double p1, double p2, double p4, double delta1, double delta2) {
  for (double x : {p1, p2, p4, delta1, delta2}) {
    if (!std::isfinite(x)) throw std::invalid_argument("gains: theorem parameters must be finite");
  }
  if (!(p1 > 0.0)) throw std::invalid_argument("gains: theorem mode requires p1 > 0");
  if (!(p2 < 0.0)) throw std::invalid_argument("gains: theorem mode requires p2 < 0");
  if (!(p1 * p4 - p2 * p2 > 0.0)) throw std::invalid_argument("gains: theorem mode requires p1*p4 - p2^2 > 0");
  const double denom = p2 * p2 * p2 - p1 * p2 * p4;
  const double cross = -p2 * delta1 + p4 * delta2;
  const double bracket = cross * cross / 4.0 + p2 * p2 * p1 / p4 + p2 * p2 * delta2 - p1 * p2 * delta1;
  Gains g;
  g.h1 = p4 / denom * bracket;
  g.h2 = (p1 - p2 * g.h1) / p4;
  return g;
}

GainSchedule GainSchedule::constant(double h1, double h2) {
  if (!(h1 > 0.0) || !(h2 > 0.0) || !std::isfinite(h1) || !std::isfinite(h2)) {
    throw std::invalid_argument("gains: constant h1, h2 must be positive");
  }
  GainSchedule g;
  g.mode_ = Mode::Constant;
  g.c0_ = h1;
  g.d0_ = h2;
  return g;
}

GainSchedule GainSchedule::affine(double c1, double c0, double d1, double d0) {
  for (double x : {c1, c0, d1, d0}) {
    if (!std::isfinite(x)) throw std::invalid_argument("gains: affine coefficients must be finite");
  }
  // |v_dot| >= 0, so positive intercepts and non-negative slopes keep h1, h2 > 0 everywhere.
  if (!(c0 > 0.0) || !(d0 > 0.0) || c1 < 0.0 || d1 < 0.0) {
    throw std::invalid_argument("gains: affine schedule needs c0, d0 > 0 and c1, d1 >= 0");
  }
  GainSchedule g;
  g.mode_ = Mode::AffineInAccel;
  g.c1_ = c1;
  g.c0_ = c0;
  g.d1_ = d1;
  g.d0_ = d0;
  return g;
}

GainSchedule GainSchedule::theorem(const TheoremGainParams& params, PhiForm form, double h3) {
  const auto& p = params;
  for (double x : {p.D1, p.D2, p.D3, p.D4, p.gamma}) {
    if (!std::isfinite(x)) throw std::invalid_argument("gains: theorem parameters must be finite");
  }
  theorem_gains(p.p1, p.p2, p.p4, 0.0, 0.0);  // validates the weights
  if (p.D1 < 0.0 || p.D2 < 0.0 || p.D3 < 0.0 || p.D4 < 0.0) {
    throw std::invalid_argument("gains: bounds D1..D4 must be non-negative");
  }
  if (!(p.gamma > 0.0)) throw std::invalid_argument("gains: gamma must be positive");
  GainSchedule g;
  g.mode_ = Mode::Theorem;
  g.theorem_ = params;
  g.form_ = form;
  g.h3_ = h3;
  return g;
}

double GainSchedule::delta1() const {
  return theorem_.D1 + theorem_.D2 / phi1(theorem_.gamma, form_, h3_);
}

double GainSchedule::delta2(double v_dot) const { return theorem_.D3 * std::abs(v_dot) + theorem_.D4; }

Gains GainSchedule::compute(double v_dot) const {
  switch (mode_) {
    case Mode::Constant: return {c0_, d0_};
    case Mode::AffineInAccel: {
      const double a = std::abs(v_dot);
      return {c1_ * a + c0_, d1_ * a + d0_};
    }
    case Mode::Theorem:
      return theorem_gains(theorem_.p1, theorem_.p2, theorem_.p4, delta1(), delta2(v_dot));
  }
  return {};
}

void ControllerSpec::validate() const {
  if (!(K_bar > 0.0) || !(T_v_bar >= 0.0)) throw std::invalid_argument("controller: bad nominal plant");
  if (family == ControllerFamily::VGPID) {
    if (!std::isfinite(pid.kp + pid.ki + pid.kd + pid.delta_kp_ad + pid.delta_kp_other)) {
      throw std::invalid_argument("controller: PID gains must be finite");
    }
    return;
  }
  surface.validate();
  if (surface.family != surface_family_for(family)) {
    throw std::invalid_argument("controller: " + std::string(to_string(family)) + " uses the " +
                                std::string(to_string(surface_family_for(family))) + " surface, not " +
                                std::string(to_string(surface.family)));
  }
  if (family == ControllerFamily::IFVSTA && feedforward_enabled) {
    throw std::invalid_argument("controller: IFVSTA is PFVSTA without feedforward");
  }
  if (family != ControllerFamily::IFVSTA && !feedforward_enabled) {
    throw std::invalid_argument("controller: only IFVSTA drops the feedforward term");
  }
  if (phi_form_for(family) == PhiForm::HalfPowerLinear && !(h3 >= 0.0)) {
    throw std::invalid_argument("controller: h3 must be >= 0");
  }
  if (z_limit && !(*z_limit > 0.0)) throw std::invalid_argument("controller: z_limit must be positive");
}

Controller::Controller(const ControllerSpec& spec, double step)
    : spec_(spec), h_(step), form_(phi_form_for(spec.family)) {
  spec_.validate();
  if (!(step > 0.0)) throw std::invalid_argument("controller: step must be positive");
  if (is_super_twisting()) surface_.emplace(spec_.surface, step);
}

void Controller::reset() {
  if (surface_) surface_->reset();
  tick_ = 0;
  z_ = 0.0;
  pid_integral_ = 0.0;
  last_ = {};
}

double Controller::step(const ControlInput& in) {
  return is_super_twisting() ? step_super_twisting(in) : step_pid(in);
}

namespace {

void require_finite(double x, const char* term) {
  if (!std::isfinite(x)) throw NonFiniteControl(std::string("non-finite ") + term);
}

}  // namespace

double Controller::step_super_twisting(const ControlInput& in) {
  const Gains g = spec_.gains.compute(in.v_dot);
  require_finite(g.h1, "gain h1");
  require_finite(g.h2, "gain h2");
  const SurfaceSample sample = surface_->advance(tick_++, in.e, in.e_dot);
  require_finite(sample.s, "sliding variable s");
  require_finite(sample.memory_term_derivative, "fractional derivative term");
  require_finite(sample.nonlinear_feedback, "nonlinear feedback term");

  const double ff = spec_.feedforward_enabled ? in.r_ddot : 0.0;
  const double memory = spec_.surface.family == SurfaceFamily::LSS ? 0.0 : spec_.surface.k1 * sample.memory_term_derivative;
  const double u_eq = (ff - memory - sample.nonlinear_feedback + spec_.T_v_bar * in.v) / spec_.K_bar;
  require_finite(u_eq, "equivalent control u_eq");

  const double p1 = phi1(sample.s, form_, spec_.h3);
  const double u_sw = -g.h1 / spec_.K_bar * p1 - z_;
  require_finite(u_sw, "switching control u_sw");

  last_.u = u_eq + u_sw;
  last_.u_eq = u_eq;
  last_.u_sw = u_sw;
  last_.s = sample.s;
  last_.h1 = g.h1;
  last_.h2 = g.h2;
  last_.z = z_;

  z_ += h_ * g.h2 / spec_.K_bar * phi2(sample.s, form_, spec_.h3);
  require_finite(z_, "super-twisting integrator z");
  if (spec_.z_limit) z_ = std::clamp(z_, -*spec_.z_limit, *spec_.z_limit);
  return last_.u;
}

double Controller::step_pid(const ControlInput& in) {
  const auto& pid = spec_.pid;
  const double kp = pid.kp + (in.phase == Phase::AD ? pid.delta_kp_ad : pid.delta_kp_other);
  const double u = -(kp * in.e + pid.ki * pid_integral_ + pid.kd * in.e_dot);
  require_finite(u, "PID output");
  pid_integral_ += in.e * h_;
  ++tick_;
  last_ = {};
  last_.u = u;
  last_.u_sw = u;
  last_.s = in.e_dot + spec_.surface.k2 * in.e;
  last_.h1 = kp;
  last_.z = pid_integral_;
  return u;
}

ErrorBound error_bound_epsilon(double k1, double k2, double a, double kappa, double gamma) {
  for (double x : {k1, k2, a, kappa, gamma}) {
    if (!std::isfinite(x)) throw std::invalid_argument("error bound: arguments must be finite");
  }
  if (k1 < 0.0 || kappa < 0.0 || gamma < 0.0 || !(k2 > 0.0)) {
    throw std::invalid_argument("error bound: need k1, kappa, gamma >= 0 and k2 > 0");
  }
  if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("error bound: a must lie in (0, 1]");
  const double lin = k1 * kappa;
  if (a == 1.0) {
    if (k2 <= lin) return {false, std::numeric_limits<double>::infinity()};
    return {true, gamma / (k2 - lin)};
  }
  if (lin == 0.0) return {true, std::pow(gamma / k2, a)};
  auto f = [&](double x) { return lin * std::pow(x, a) - k2 * std::pow(x, 1.0 / a) + gamma; };
  // f rises from f(0) = gamma >= 0, peaks once and falls to -inf: one positive root.
  double hi = 1.0;
  while (f(hi) >= 0.0) hi *= 2.0;
  double lo = 0.0;
  if (gamma == 0.0) {
    // The root at 0 is excluded; start from the interior maximum.
    lo = std::pow(lin * a * a / k2, 1.0 / (1.0 / a - a));
  }
  for (int i = 0; i < 400 && (hi - lo) > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return {true, 0.5 * (lo + hi)};
}

}  // namespace wafersim
