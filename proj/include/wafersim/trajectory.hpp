#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wafersim {

/// Scanning phase label: idle/hold, acceleration or deceleration, constant-velocity scan.
enum class Phase : std::uint8_t { IP = 0, AD = 1, SP = 2 };

std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view name);

enum class AccelShape { Trapezoid, SCurve };

struct ScanProfileSpec {
  double scan_length = 0.05;     // total travel of one scan [m]
  double scan_velocity = 0.1;    // [m/s]
  double idle_time = 0.2;        // [s]
  double accel_time = 0.0;       // 0 derives v / max_accel
  double max_accel = 10.0;       // [m/s^2]
  double hold_time = 0.1;        // [s]
  double sample_rate = 10000.0;  // [Hz]
  double start_position = 0.0;   // [m]
  AccelShape shape = AccelShape::Trapezoid;
  bool return_scan = false;      // scan back to the start after the hold
  double final_idle_time = 0.0;  // idle after the return scan [s]

  void validate() const;
};

/// One acceleration pulse; ramp > 0 gives linear edges of that duration.
struct AccelPulse {
  double start = 0.0;
  double duration = 0.0;
  double amplitude = 0.0;
  double ramp = 0.0;
};

struct PulseProfileSpec {
  std::vector<AccelPulse> pulses;
  double duration = 1.0;
  double sample_rate = 10000.0;
  double start_position = 0.0;

  void validate() const;
};

/// Sampled reference with per-sample phase labels.
struct TrajectoryProfile {
  double step = 1e-4;
  std::vector<double> r;
  std::vector<double> r_dot;
  std::vector<double> r_ddot;
  std::vector<Phase> phase;
  std::string shape_note;  // which acceleration shape produced the profile

  std::size_t size() const { return r.size(); }
  double time(std::size_t k) const { return static_cast<double>(k) * step; }
  double duration() const { return size() == 0 ? 0.0 : time(size() - 1); }
};

/**
 * Idle -> accelerate -> constant-velocity scan -> decelerate -> hold, and the
 * mirrored return when requested.
 *
 * Acceleration is generated on the sample grid and velocity/position are its
 * cumulative trapezoid integrals, so the discrete profile is self-consistent.
 * Acceleration segments are scaled so the scan velocity is reached exactly.
 */
TrajectoryProfile generate_scan(const ScanProfileSpec& spec);

/// Acceleration pulses integrated twice (trapezoid) for velocity and position.
TrajectoryProfile acceleration_pulse_profile(const PulseProfileSpec& spec);

/// CSV with columns t,r,r_dot,r_ddot,phase.
std::string trajectory_csv(const TrajectoryProfile& profile);

}  // namespace wafersim
