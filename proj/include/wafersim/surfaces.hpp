#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "wafersim/frac_calc.hpp"

namespace wafersim {

/// Linear, integral, fractional-order and power-fractional sliding surfaces.
enum class SurfaceFamily { LSS, ISS, FSS, PFSS };

std::string_view to_string(SurfaceFamily family);
SurfaceFamily surface_family_from_string(std::string_view name);

struct SurfaceSpec {
  SurfaceFamily family = SurfaceFamily::PFSS;
  double k1 = 8.0;
  double k2 = 500.0;
  double xi = 0.5;
  double a = 0.5;
  double memory_seconds = 1.0;  // short-memory length of the fractional operators

  /// Exponent applied inside the memory term (a for PFSS, 1 otherwise).
  double inner_exponent() const;
  /// Exponent of the proportional term (1/a for PFSS, 1 otherwise).
  double outer_exponent() const;

  void validate() const;
};

/// Everything the equivalent control needs from one surface evaluation.
struct SurfaceSample {
  double s = 0.0;
  double memory_term = 0.0;             // D^{xi-1}[sig(e)^a] (or the integral of e)
  double memory_term_derivative = 0.0;  // D^{xi}[sig(e)^a] (or e itself)
  double nonlinear_feedback = 0.0;      // d/dt of k2*sig(e)^{1/a} given e_dot
};

/**
 * Per-run sliding-variable evaluator.
 *
 * The fractional and integral memories start zeroed and must advance exactly
 * once per control sample; advance() rejects a repeated or skipped tick.
 */
class SlidingSurface {
 public:
  SlidingSurface(const SurfaceSpec& spec, double step);

  SurfaceSample advance(std::int64_t tick, double e, double e_dot);

  /// Value of s for (e, e_dot) at the next tick, leaving the memory untouched.
  double preview(double e, double e_dot) const;

  void reset();

  const SurfaceSpec& spec() const { return spec_; }
  double step() const { return step_; }

 private:
  SurfaceSpec spec_;
  double step_;
  std::optional<GLOperator> frac_;        // order xi - 1
  std::optional<GLOperator> frac_deriv_;  // order xi
  double integral_ = 0.0;
  std::int64_t next_tick_ = 0;
};

/// (k2/a)|e|^{(1-a)/a} e_dot, the time derivative of k2*sig(e)^{1/a}; k2*e_dot when a = 1.
double nonlinear_feedback_term(double k2, double a, double e, double e_dot);

/// Value e* at which the surface dynamics with s held at `s_value` come to rest.
double surface_equilibrium(const SurfaceSpec& spec, double s_value);

struct SurfaceTrace {
  double step = 0.0;
  std::vector<double> t;
  std::vector<double> e;
  std::vector<double> memory_term;
};

/**
 * Error dynamics on a surface with the sliding variable pinned:
 * e_dot = s_value - k1*memory(e) - k2*sig(e)^{1/a}, explicit Euler at `step`.
 */
SurfaceTrace simulate_surface_dynamics(SurfaceSpec spec, double s_value, double e0, double step,
                                       double duration);

struct SettlingStats {
  double equilibrium = 0.0;
  std::optional<double> settling_time;  // enter and stay within the band
  double overshoot = 0.0;               // largest excursion past equilibrium
  double peak_deviation = 0.0;
};

/// Band is `band_fraction` of the largest deviation from equilibrium.
SettlingStats settling_stats(const SurfaceTrace& trace, double equilibrium, double band_fraction = 0.05);

}  // namespace wafersim
