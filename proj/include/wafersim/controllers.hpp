#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "wafersim/surfaces.hpp"
#include "wafersim/trajectory.hpp"

namespace wafersim {

enum class ControllerFamily { CGSTA, VGSTA, VGPID, FCGSTA, IFVSTA, PFVSTA };

std::string_view to_string(ControllerFamily family);
/// Accepts LVGSTA as an alias of VGSTA.
ControllerFamily controller_family_from_string(std::string_view name);

/// Shape of the super-twisting nonlinearity Phi_1.
enum class PhiForm {
  VariablePower,   // |s|^{alpha(s)} sgn(s)
  HalfPower,       // |s|^{1/2} sgn(s)
  HalfPowerLinear  // |s|^{1/2} sgn(s) + h3 s
};

PhiForm phi_form_for(ControllerFamily family);

/// (4|s| + 1) / (2(|s| + 1)), rising from 1/2 towards 2.
double alpha_exponent(double s);
/// d alpha / d|s| = 3 / (2(|s| + 1)^2).
double alpha_slope(double s);

double phi1(double s, PhiForm form, double h3 = 0.0);
/// Phi_1'(s); even in s, and +inf at the origin for the half-power forms.
double phi1_derivative(double s, PhiForm form, double h3 = 0.0);
/// Phi_1'(s) Phi_1(s), with Phi_2(0) = 0.
double phi2(double s, PhiForm form, double h3 = 0.0);

struct Gains {
  double h1 = 0.0;
  double h2 = 0.0;
};

struct TheoremGainParams {
  double p1 = 2.0;
  double p2 = -1.0;
  double p4 = 1.0;
  double D1 = 0.0;
  double D2 = 0.0;
  double D3 = 0.0;
  double D4 = 0.0;
  double gamma = 0.01;
};

/// h1, h2 from the convergence-region theorem for given delta_1, delta_2.
/// Rejects weights unless p1 > 0, p2 < 0 and p1 p4 > p2^2.
Gains theorem_gains(double p1, double p2, double p4, double delta1, double delta2);

/// Acceleration-scheduled switching gains.
class GainSchedule {
 public:
  enum class Mode { Constant, AffineInAccel, Theorem };

  static GainSchedule constant(double h1, double h2);
  /// h1 = c1|v_dot| + c0, h2 = d1|v_dot| + d0.
  static GainSchedule affine(double c1, double c0, double d1, double d0);
  /// Rejects p1 <= 0, p2 >= 0 or p1 p4 <= p2^2.
  static GainSchedule theorem(const TheoremGainParams& params, PhiForm form, double h3 = 0.0);

  Gains compute(double v_dot) const;

  double delta1() const;
  double delta2(double v_dot) const;

  Mode mode() const { return mode_; }
  const TheoremGainParams& theorem_params() const { return theorem_; }
  double c1() const { return c1_; }
  double c0() const { return c0_; }
  double d1() const { return d1_; }
  double d0() const { return d0_; }

 private:
  Mode mode_ = Mode::Constant;
  double c1_ = 0.0, c0_ = 0.0, d1_ = 0.0, d0_ = 0.0;
  TheoremGainParams theorem_;
  PhiForm form_ = PhiForm::VariablePower;
  double h3_ = 0.0;
};

struct PidGains {
  double kp = 1.2e6;
  double ki = 8e6;
  double kd = 3e3;
  double delta_kp_ad = 0.5e6;
  double delta_kp_other = 0.2e6;
};

struct ControllerSpec {
  ControllerFamily family = ControllerFamily::PFVSTA;
  SurfaceSpec surface;
  GainSchedule gains = GainSchedule::affine(0.1, 50.0, 0.1, 10.0);
  double h3 = 0.0;
  double K_bar = 4.0;
  double T_v_bar = 1.0;
  bool feedforward_enabled = true;
  PidGains pid;
  std::optional<double> z_limit;  // anti-windup clamp on the super-twisting integrator

  /// Family defaults: surface family, Phi form and feedforward flag consistent with `family`.
  void validate() const;
};

/// Per-sample measurements handed to the controller.
struct ControlInput {
  double e = 0.0;       // p - r
  double e_dot = 0.0;
  double v = 0.0;
  double v_dot = 0.0;   // acceleration used for gain scheduling
  double r_ddot = 0.0;
  Phase phase = Phase::IP;
};

struct ControlDiagnostics {
  double u = 0.0;
  double u_eq = 0.0;
  double u_sw = 0.0;
  double s = 0.0;
  double h1 = 0.0;
  double h2 = 0.0;
  double z = 0.0;  // integrator state used for this sample's u
};

class NonFiniteControl : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * One of the six control laws with its per-run state.
 *
 * Super-twisting families: u = u_eq + u_sw with
 *   u_eq = (r_ddot*ff - k1 D^xi[sig(e)^a] - nonlinear feedback + T_v_bar v) / K_bar
 *   u_sw = -(h1/K_bar) Phi_1(s) - z,  z' = (h2/K_bar) Phi_2(s)  (forward Euler).
 * VGPID: u = -(Kp(phase) e + Ki int e + Kd e_dot), Kp raised in AD phases.
 */
class Controller {
 public:
  Controller(const ControllerSpec& spec, double step);

  double step(const ControlInput& in);

  const ControlDiagnostics& last() const { return last_; }
  const ControllerSpec& spec() const { return spec_; }
  PhiForm phi_form() const { return form_; }
  bool is_super_twisting() const { return spec_.family != ControllerFamily::VGPID; }
  void reset();

 private:
  double step_super_twisting(const ControlInput& in);
  double step_pid(const ControlInput& in);

  ControllerSpec spec_;
  double h_;
  PhiForm form_;
  std::optional<SlidingSurface> surface_;
  std::int64_t tick_ = 0;
  double z_ = 0.0;
  double pid_integral_ = 0.0;
  ControlDiagnostics last_;
};

/// Default surface family for a controller family.
SurfaceFamily surface_family_for(ControllerFamily family);

struct ErrorBound {
  bool finite = true;
  double epsilon = 0.0;
};

/**
 * Positive root of k1*kappa*x^a - k2*x^{1/a} + gamma = 0, the steady error
 * bound implied by |s| <= gamma. For a = 1 the map is linear and has no
 * positive root when k2 <= k1*kappa; that case reports finite = false.
 */
ErrorBound error_bound_epsilon(double k1, double k2, double a, double kappa, double gamma);

}  // namespace wafersim
