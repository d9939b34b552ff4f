#include "wafersim/surfaces.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace wafersim {

std::string_view to_string(SurfaceFamily family) {
  switch (family) {
    case SurfaceFamily::LSS: return "LSS";
    case SurfaceFamily::ISS: return "ISS";
    case SurfaceFamily::FSS: return "FSS";
    case SurfaceFamily::PFSS: return "PFSS";
  }
  return "?";
}

SurfaceFamily surface_family_from_string(std::string_view name) {
  if (name == "LSS") return SurfaceFamily::LSS;
  if (name == "ISS") return SurfaceFamily::ISS;
  if (name == "FSS") return SurfaceFamily::FSS;
  if (name == "PFSS") return SurfaceFamily::PFSS;
  throw std::invalid_argument("unknown surface family: " + std::string(name));
}

double SurfaceSpec::inner_exponent() const { return family == SurfaceFamily::PFSS ? a : 1.0; }
double SurfaceSpec::outer_exponent() const { return family == SurfaceFamily::PFSS ? 1.0 / a : 1.0; }

void SurfaceSpec::validate() const {
  if (!std::isfinite(k1) || !std::isfinite(k2) || !std::isfinite(xi) || !std::isfinite(a)) {
    throw std::invalid_argument("surface: coefficients must be finite");
  }
  if (k1 < 0.0) throw std::invalid_argument("surface: k1 must be >= 0");
  if (!(k2 > 0.0)) throw std::invalid_argument("surface: k2 must be positive");
  switch (family) {
    case SurfaceFamily::LSS:
    case SurfaceFamily::ISS:
      break;
    case SurfaceFamily::FSS:
      if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("surface: FSS needs xi in (0,1)");
      break;
    case SurfaceFamily::PFSS:
      if (!(xi > 0.0 && xi < 1.0) || !(a > 0.0 && a < 1.0)) {
        throw std::invalid_argument("surface: PFSS needs xi, a in (0,1)");
      }
      break;
  }
  if (family == SurfaceFamily::FSS || family == SurfaceFamily::PFSS) {
    if (!(memory_seconds > 0.0)) throw std::invalid_argument("surface: memory_seconds must be positive");
  }
}

double nonlinear_feedback_term(double k2, double a, double e, double e_dot) {
  if (a == 1.0) return k2 * e_dot;
  const double mag = std::abs(e);
  if (mag == 0.0) return 0.0;  // exponent (1-a)/a > 0 for a in (0,1)
  return k2 / a * std::pow(mag, (1.0 - a) / a) * e_dot;
}

SlidingSurface::SlidingSurface(const SurfaceSpec& spec, double step) : spec_(spec), step_(step) {
  spec_.validate();
  if (!(step > 0.0)) throw std::invalid_argument("surface: step must be positive");
  if (spec_.family == SurfaceFamily::FSS || spec_.family == SurfaceFamily::PFSS) {
    const std::size_t window = window_for(spec_.memory_seconds, step);
    frac_.emplace(spec_.xi - 1.0, step, window);
    frac_deriv_.emplace(spec_.xi, step, window);
  }
}

double SlidingSurface::preview(double e, double e_dot) const {
  switch (spec_.family) {
    case SurfaceFamily::LSS:
      return e_dot + spec_.k2 * e;
    case SurfaceFamily::ISS:
      return e_dot + spec_.k1 * (integral_ + e * step_) + spec_.k2 * e;
    case SurfaceFamily::FSS:
    case SurfaceFamily::PFSS: {
      const double inner = sig_pow(e, spec_.inner_exponent());
      return e_dot + spec_.k1 * frac_->peek(inner) + spec_.k2 * sig_pow(e, spec_.outer_exponent());
    }
  }
  return 0.0;
}

SurfaceSample SlidingSurface::advance(std::int64_t tick, double e, double e_dot) {
  if (tick != next_tick_) {
    throw std::logic_error("surface memory advanced out of sequence: expected tick " +
                           std::to_string(next_tick_) + ", got " + std::to_string(tick));
  }
  if (!std::isfinite(e) || !std::isfinite(e_dot)) {
    throw std::invalid_argument("surface: non-finite error sample");
  }
  ++next_tick_;
  SurfaceSample out;
  switch (spec_.family) {
    case SurfaceFamily::LSS:
      out.s = e_dot + spec_.k2 * e;
      out.nonlinear_feedback = spec_.k2 * e_dot;
      break;
    case SurfaceFamily::ISS:
      integral_ += e * step_;
      out.memory_term = integral_;
      out.memory_term_derivative = e;
      out.s = e_dot + spec_.k1 * integral_ + spec_.k2 * e;
      out.nonlinear_feedback = spec_.k2 * e_dot;
      break;
    case SurfaceFamily::FSS:
    case SurfaceFamily::PFSS: {
      const double inner = sig_pow(e, spec_.inner_exponent());
      out.memory_term = frac_->step(inner);
      out.memory_term_derivative = frac_deriv_->step(inner);
      out.s = e_dot + spec_.k1 * out.memory_term + spec_.k2 * sig_pow(e, spec_.outer_exponent());
      out.nonlinear_feedback =
          nonlinear_feedback_term(spec_.k2, spec_.family == SurfaceFamily::PFSS ? spec_.a : 1.0, e, e_dot);
      break;
    }
  }
  return out;
}

void SlidingSurface::reset() {
  if (frac_) frac_->reset();
  if (frac_deriv_) frac_deriv_->reset();
  integral_ = 0.0;
  next_tick_ = 0;
}

double surface_equilibrium(const SurfaceSpec& spec, double s_value) {
  spec.validate();
  // Memory-bearing surfaces keep integrating any nonzero error, so their only
  // rest point is e = 0 (with the memory holding s_value / k1).
  if (spec.family != SurfaceFamily::LSS && spec.k1 > 0.0) return 0.0;
  // Otherwise solve s_value = k2 * sig(e)^{q} by bisection on the monotone map.
  const double q = spec.outer_exponent();
  if (s_value == 0.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  const double target = std::abs(s_value);
  while (spec.k2 * std::pow(hi, q) < target) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (spec.k2 * std::pow(mid, q) < target ? lo : hi) = mid;
  }
  return std::copysign(0.5 * (lo + hi), s_value);
}

SurfaceTrace simulate_surface_dynamics(SurfaceSpec spec, double s_value, double e0, double step,
                                       double duration) {
  if (!(duration >= 0.0)) throw std::invalid_argument("surface dynamics: bad duration");
  // The trace keeps the whole history unless a shorter memory was requested.
  spec.memory_seconds = std::max(spec.memory_seconds, duration + step);
  SlidingSurface surface(spec, step);
  const auto n = static_cast<std::size_t>(std::llround(duration / step));
  SurfaceTrace trace;
  trace.step = step;
  trace.t.reserve(n + 1);
  trace.e.reserve(n + 1);
  double e = e0;
  for (std::size_t k = 0; k <= n; ++k) {
    // s is affine in e_dot with unit slope, so e_dot = s_value - s(e, 0).
    const SurfaceSample sample = surface.advance(static_cast<std::int64_t>(k), e, 0.0);
    const double e_dot = s_value - sample.s;
    trace.t.push_back(static_cast<double>(k) * step);
    trace.e.push_back(e);
    trace.memory_term.push_back(sample.memory_term);
    e += step * e_dot;
    if (!std::isfinite(e)) throw std::runtime_error("surface dynamics diverged; reduce the step");
  }
  return trace;
}

SettlingStats settling_stats(const SurfaceTrace& trace, double equilibrium, double band_fraction) {
  SettlingStats out;
  out.equilibrium = equilibrium;
  if (trace.e.empty()) return out;
  int side = 0;  // side of equilibrium the trajectory starts from
  for (double e : trace.e) {
    const double dev = e - equilibrium;
    out.peak_deviation = std::max(out.peak_deviation, std::abs(dev));
    if (side == 0 && dev != 0.0) side = dev > 0.0 ? 1 : -1;
    if (side != 0 && dev * side < 0.0) out.overshoot = std::max(out.overshoot, std::abs(dev));
  }
  const double band = band_fraction * out.peak_deviation;
  std::optional<std::size_t> last_outside;
  for (std::size_t k = 0; k < trace.e.size(); ++k) {
    if (std::abs(trace.e[k] - equilibrium) > band) last_outside = k;
  }
  if (!last_outside) {
    out.settling_time = 0.0;
  } else if (*last_outside + 1 < trace.e.size()) {
    out.settling_time = trace.t[*last_outside + 1];
  }
  return out;
}

}  // namespace wafersim
