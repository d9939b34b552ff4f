#include "wafersim/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "wafersim/format.hpp"

namespace wafersim {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::IP: return "IP";
    case Phase::AD: return "AD";
    case Phase::SP: return "SP";
  }
  return "?";
}

Phase phase_from_string(std::string_view name) {
  if (name == "IP") return Phase::IP;
  if (name == "AD") return Phase::AD;
  if (name == "SP") return Phase::SP;
  throw std::invalid_argument("unknown phase label: " + std::string(name));
}

void ScanProfileSpec::validate() const {
  for (double x : {scan_length, scan_velocity, idle_time, accel_time, max_accel, hold_time,
                   final_idle_time, start_position, sample_rate}) {
    if (!std::isfinite(x)) throw std::invalid_argument("scan profile: values must be finite");
  }
  if (scan_length < 0.0 || scan_velocity < 0.0 || idle_time < 0.0 || accel_time < 0.0 ||
      hold_time < 0.0 || final_idle_time < 0.0) {
    throw std::invalid_argument("scan profile: lengths, velocities and durations must be >= 0");
  }
  if (!(sample_rate > 0.0)) throw std::invalid_argument("scan profile: sample_rate must be positive");
  if (scan_velocity > 0.0 && !(max_accel > 0.0)) {
    throw std::invalid_argument("scan profile: max_accel must be positive for a moving scan");
  }
  if ((scan_length > 0.0) != (scan_velocity > 0.0)) {
    throw std::invalid_argument("scan profile: scan_length and scan_velocity must both be zero or both positive");
  }
  if (scan_velocity > 0.0 && accel_time > 0.0 && scan_velocity > max_accel * accel_time * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "scan profile infeasible: reaching " << scan_velocity << " m/s within " << accel_time
        << " s needs " << scan_velocity / accel_time << " m/s^2 but max_accel is " << max_accel;
    throw std::invalid_argument(msg.str());
  }
}

void PulseProfileSpec::validate() const {
  if (!(duration >= 0.0) || !std::isfinite(duration)) throw std::invalid_argument("pulse profile: bad duration");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("pulse profile: sample_rate must be positive");
  for (const auto& p : pulses) {
    if (!std::isfinite(p.start) || !std::isfinite(p.duration) || !std::isfinite(p.amplitude) ||
        !std::isfinite(p.ramp)) {
      throw std::invalid_argument("pulse profile: pulse fields must be finite");
    }
    if (p.duration < 0.0 || p.ramp < 0.0 || 2.0 * p.ramp > p.duration) {
      throw std::invalid_argument("pulse profile: need duration >= 2*ramp >= 0");
    }
  }
}

namespace {

struct Segment {
  std::vector<double> accel;  // acceleration samples
  Phase phase;
};

// Unit acceleration shape over `samples` grid points, framed by zero samples,
// together with the velocity it adds per unit amplitude: h * sum(shape).
std::vector<double> accel_shape(std::size_t samples, std::size_t ramp) {
  std::vector<double> shape(samples, 1.0);
  if (ramp == 0) return shape;
  for (std::size_t i = 0; i < samples; ++i) {
    const double up = static_cast<double>(i + 1) / static_cast<double>(ramp + 1);
    const double down = static_cast<double>(samples - i) / static_cast<double>(ramp + 1);
    shape[i] = std::min({1.0, up, down});
  }
  return shape;
}

struct AccelPlan {
  std::vector<double> samples;  // signed-free acceleration values, reach +velocity
  double peak = 0.0;
};

AccelPlan plan_acceleration(const ScanProfileSpec& spec, double h, std::string& note) {
  const double v = spec.scan_velocity;
  AccelPlan plan;
  if (spec.shape == AccelShape::Trapezoid) {
    double duration = spec.accel_time > 0.0 ? spec.accel_time : v / spec.max_accel;
    auto n = static_cast<std::size_t>(std::ceil(duration / h - 1e-9));
    n = std::max<std::size_t>(n, 1);
    // Keep the peak within max_accel after snapping to the grid.
    while (v / (static_cast<double>(n) * h) > spec.max_accel * (1.0 + 1e-12)) ++n;
    const double a = v / (static_cast<double>(n) * h);
    plan.samples.assign(n, a);
    plan.peak = a;
    note = "trapezoid";
  } else {
    const double duration = spec.accel_time > 0.0 ? spec.accel_time : 2.0 * v / spec.max_accel;
    auto n = static_cast<std::size_t>(std::llround(duration / h));
    n = std::max<std::size_t>(n, 3);
    // Constant-jerk edges of length ramp = duration - v/max_accel (triangular
    // when that would exceed half the segment).
    const double flat_needed = v / spec.max_accel;
    double ramp_time = duration - flat_needed;
    ramp_time = std::clamp(ramp_time, 0.0, 0.5 * duration);
    auto ramp = static_cast<std::size_t>(std::llround(ramp_time / h));
    ramp = std::min(ramp, (n - 1) / 2);
    std::vector<double> shape = accel_shape(n, ramp);
    double sum = 0.0;
    for (double s : shape) sum += s;
    const double a = v / (h * sum);
    if (a > spec.max_accel * (1.0 + 1e-9)) {
      std::ostringstream msg;
      msg << "scan profile infeasible: S-curve over " << duration << " s needs peak " << a
          << " m/s^2 > max_accel " << spec.max_accel;
      throw std::invalid_argument(msg.str());
    }
    for (double& s : shape) s *= a;
    plan.samples = std::move(shape);
    plan.peak = a;
    note = "s-curve";
  }
  return plan;
}

TrajectoryProfile integrate(std::vector<Segment> segments, double h, double r0) {
  TrajectoryProfile out;
  out.step = h;
  std::size_t total = 1;
  for (const auto& s : segments) total += s.accel.size();
  out.r.reserve(total);
  out.r_dot.reserve(total);
  out.r_ddot.reserve(total);
  out.phase.reserve(total);
  // Sample 0 is the initial rest state.
  Phase first = segments.empty() ? Phase::IP : segments.front().phase;
  out.r.push_back(r0);
  out.r_dot.push_back(0.0);
  out.r_ddot.push_back(0.0);
  out.phase.push_back(first == Phase::AD ? Phase::IP : first);
  for (const auto& seg : segments) {
    for (double a : seg.accel) {
      const double a_prev = out.r_ddot.back();
      const double v_prev = out.r_dot.back();
      const double v = v_prev + 0.5 * h * (a_prev + a);
      out.r_ddot.push_back(a);
      out.r_dot.push_back(v);
      out.r.push_back(out.r.back() + 0.5 * h * (v_prev + v));
      out.phase.push_back(seg.phase);
    }
  }
  return out;
}

}  // namespace

TrajectoryProfile generate_scan(const ScanProfileSpec& spec) {
  spec.validate();
  const double h = 1.0 / spec.sample_rate;
  auto samples_for = [h](double seconds) {
    return static_cast<std::size_t>(std::llround(seconds / h));
  };
  std::vector<Segment> segs;
  segs.push_back({std::vector<double>(samples_for(spec.idle_time), 0.0), Phase::IP});
  std::string note = "static";

  if (spec.scan_velocity > 0.0) {
    AccelPlan plan = plan_acceleration(spec, h, note);
    const std::vector<double>& up = plan.samples;
    std::vector<double> down(up.size());
    for (std::size_t i = 0; i < up.size(); ++i) down[i] = -up[i];

    // Distance covered by one accel + decel pair, measured on the discrete grid.
    TrajectoryProfile probe = integrate({{up, Phase::AD}, {{0.0}, Phase::SP}, {down, Phase::AD}, {{0.0}, Phase::IP}}, h, 0.0);
    const double ramp_distance = probe.r.back() - spec.scan_velocity * h;
    const double cruise = spec.scan_length - ramp_distance;
    if (cruise < -1e-12) {
      std::ostringstream msg;
      msg << "scan profile infeasible: scan_length " << spec.scan_length
          << " m is shorter than the acceleration distance " << ramp_distance << " m";
      throw std::invalid_argument(msg.str());
    }
    const std::size_t cruise_samples = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cruise / (spec.scan_velocity * h))));

    auto add_scan = [&](double sign) {
      std::vector<double> a_up(up), a_down(down);
      if (sign < 0) {
        for (double& x : a_up) x = -x;
        for (double& x : a_down) x = -x;
      }
      segs.push_back({a_up, Phase::AD});
      segs.push_back({std::vector<double>(cruise_samples, 0.0), Phase::SP});
      segs.push_back({a_down, Phase::AD});
    };
    add_scan(1.0);
    std::size_t hold = samples_for(spec.hold_time);
    if (spec.return_scan) hold = std::max<std::size_t>(hold, 1);  // rest sample between directions
    segs.push_back({std::vector<double>(hold, 0.0), Phase::IP});
    if (spec.return_scan) {
      add_scan(-1.0);
      segs.push_back({std::vector<double>(samples_for(spec.final_idle_time), 0.0), Phase::IP});
    }
  } else {
    segs.push_back({std::vector<double>(samples_for(spec.hold_time), 0.0), Phase::IP});
  }

  TrajectoryProfile out = integrate(std::move(segs), h, spec.start_position);
  out.shape_note = note;

  // Accumulated rounding leaves the scan velocity off by a few ulps; pin it and
  // rebuild position from the pinned velocity.
  if (spec.scan_velocity > 0.0) {
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (out.phase[k] == Phase::SP) out.r_dot[k] = std::copysign(spec.scan_velocity, out.r_dot[k]);
      // The sample closing a decel segment is at rest by construction.
      else if (out.r_ddot[k] == 0.0 && std::abs(out.r_dot[k]) < 1e-12) out.r_dot[k] = 0.0;
    }
    for (std::size_t k = 1; k < out.size(); ++k) {
      out.r[k] = out.r[k - 1] + 0.5 * h * (out.r_dot[k - 1] + out.r_dot[k]);
    }
  }
  return out;
}

TrajectoryProfile acceleration_pulse_profile(const PulseProfileSpec& spec) {
  spec.validate();
  const double h = 1.0 / spec.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration / h)) + 1;
  TrajectoryProfile out;
  out.step = h;
  out.shape_note = "pulses";
  out.r.assign(n, spec.start_position);
  out.r_dot.assign(n, 0.0);
  out.r_ddot.assign(n, 0.0);
  out.phase.assign(n, Phase::IP);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * h;
    double a = 0.0;
    for (const auto& p : spec.pulses) {
      const double local = t - p.start;
      // Half-open [start, start + duration) keeps adjacent pulses from overlapping.
      if (local < -1e-12 || local >= p.duration - 1e-12) continue;
      double scale = 1.0;
      if (p.ramp > 0.0) {
        scale = std::min({1.0, local / p.ramp, (p.duration - local) / p.ramp});
      }
      a += p.amplitude * scale;
    }
    out.r_ddot[k] = a;
    out.phase[k] = (a != 0.0) ? Phase::AD : Phase::IP;
  }
  for (std::size_t k = 1; k < n; ++k) {
    out.r_dot[k] = out.r_dot[k - 1] + 0.5 * h * (out.r_ddot[k - 1] + out.r_ddot[k]);
    out.r[k] = out.r[k - 1] + 0.5 * h * (out.r_dot[k - 1] + out.r_dot[k]);
  }
  return out;
}

std::string trajectory_csv(const TrajectoryProfile& profile) {
  std::string out = "t,r,r_dot,r_ddot,phase\n";
  for (std::size_t k = 0; k < profile.size(); ++k) {
    append_number(out, profile.time(k));
    out += ',';
    append_number(out, profile.r[k]);
    out += ',';
    append_number(out, profile.r_dot[k]);
    out += ',';
    append_number(out, profile.r_ddot[k]);
    out += ',';
    out += to_string(profile.phase[k]);
    out += '\n';
  }
  return out;
}

}  // namespace wafersim
