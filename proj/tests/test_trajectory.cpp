#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "wafersim/trajectory.hpp"

using namespace wafersim;

namespace {

double phase_duration(const TrajectoryProfile& p, Phase which, std::size_t occurrence = 0) {
  std::size_t run = 0, k = 0;
  while (k < p.size()) {
    if (p.phase[k] != which) {
      ++k;
      continue;
    }
    std::size_t end = k;
    while (end < p.size() && p.phase[end] == which) ++end;
    if (run++ == occurrence) return static_cast<double>(end - k) * p.step;
    k = end;
  }
  return 0.0;
}

void expect_self_consistent(const TrajectoryProfile& p) {
  double v = p.r_dot[0], r = p.r[0];
  for (std::size_t k = 1; k < p.size(); ++k) {
    v += 0.5 * p.step * (p.r_ddot[k - 1] + p.r_ddot[k]);
    r += 0.5 * p.step * (p.r_dot[k - 1] + p.r_dot[k]);
    ASSERT_NEAR(p.r_dot[k], v, 1e-9) << "k = " << k;
    ASSERT_NEAR(p.r[k], r, 1e-9) << "k = " << k;
  }
}

}  // namespace

TEST(Scan, CaseTwoSegmentLengths) {
  ScanProfileSpec s;
  s.max_accel = 10.0;
  const TrajectoryProfile p = generate_scan(s);
  EXPECT_NEAR(phase_duration(p, Phase::AD, 0), 0.01, 1e-12);
  EXPECT_NEAR(p.r.back() - p.r.front(), 0.05, 0.5 * s.scan_velocity * p.step + 1e-12);
  EXPECT_EQ(p.shape_note, "trapezoid");
}

TEST(Scan, CaseOneAccelDuration) {
  ScanProfileSpec s;
  s.max_accel = 1.5;
  const TrajectoryProfile p = generate_scan(s);
  EXPECT_NEAR(phase_duration(p, Phase::AD, 0), 0.1 / 1.5, p.step);
  for (double a : p.r_ddot) EXPECT_LE(std::abs(a), 1.5 * (1.0 + 1e-12));
}

TEST(Scan, StaticProfile) {
  ScanProfileSpec s;
  s.scan_length = 0.0;
  s.scan_velocity = 0.0;
  s.start_position = 0.2;
  const TrajectoryProfile p = generate_scan(s);
  ASSERT_GT(p.size(), 1u);
  for (std::size_t k = 0; k < p.size(); ++k) {
    EXPECT_EQ(p.r[k], 0.2);
    EXPECT_EQ(p.phase[k], Phase::IP);
  }
}

TEST(Scan, SelfConsistentAndPinnedScanVelocity) {
  for (AccelShape shape : {AccelShape::Trapezoid, AccelShape::SCurve}) {
    for (bool ret : {false, true}) {
      ScanProfileSpec s;
      s.shape = shape;
      s.return_scan = ret;
      s.final_idle_time = 0.05;
      if (shape == AccelShape::SCurve) s.accel_time = 0.012;
      const TrajectoryProfile p = generate_scan(s);
      expect_self_consistent(p);
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (p.phase[k] == Phase::SP) ASSERT_EQ(std::abs(p.r_dot[k]), s.scan_velocity);
        if (p.phase[k] == Phase::IP) ASSERT_NEAR(p.r_dot[k], 0.0, 1e-12);
      }
      if (ret) EXPECT_NEAR(p.r.back(), p.r.front(), 1e-9);
    }
  }
}

TEST(Scan, SCurveRespectsPeakAndDuration) {
  ScanProfileSpec s;
  s.shape = AccelShape::SCurve;
  s.accel_time = 0.012;
  s.max_accel = 10.0;
  const TrajectoryProfile p = generate_scan(s);
  EXPECT_EQ(p.shape_note, "s-curve");
  EXPECT_NEAR(phase_duration(p, Phase::AD, 0), 0.012, p.step);
  double peak = 0.0;
  for (double a : p.r_ddot) peak = std::max(peak, std::abs(a));
  EXPECT_LE(peak, 10.0 * (1.0 + 1e-9));
}

TEST(Scan, InfeasibleSpecsRejected) {
  ScanProfileSpec s;
  s.accel_time = 0.005;
  s.max_accel = 10.0;  // 0.1 m/s in 5 ms needs 20 m/s^2
  EXPECT_THROW(generate_scan(s), std::invalid_argument);
  ScanProfileSpec t;
  t.scan_length = 1e-4;  // shorter than the ramps
  EXPECT_THROW(generate_scan(t), std::invalid_argument);
  ScanProfileSpec u;
  u.scan_velocity = 0.0;  // length without velocity
  EXPECT_THROW(generate_scan(u), std::invalid_argument);
}

TEST(Pulses, RectangularPulseIntegrates) {
  PulseProfileSpec spec;
  spec.pulses = {{0.0, 0.1, 1.0, 0.0}};
  spec.duration = 0.2;
  const TrajectoryProfile p = acceleration_pulse_profile(spec);
  const auto k = static_cast<std::size_t>(std::llround(0.1 / p.step));
  EXPECT_NEAR(p.r_dot[k], 0.1, p.step);
  EXPECT_NEAR(p.r[k], 0.005, 0.1 * p.step);
  expect_self_consistent(p);
}

TEST(Pulses, ZeroPulseKeepsPosition) {
  PulseProfileSpec spec;
  spec.pulses = {{0.1, 0.2, 0.0, 0.0}};
  spec.start_position = 0.3;
  const TrajectoryProfile p = acceleration_pulse_profile(spec);
  for (std::size_t k = 0; k < p.size(); ++k) EXPECT_EQ(p.r[k], 0.3);
}

TEST(Pulses, AntisymmetricPairEndsAtRest) {
  PulseProfileSpec spec;
  spec.pulses = {{0.1, 0.05, 10.0, 0.005}, {0.2, 0.05, -10.0, 0.005}};
  spec.duration = 0.4;
  const TrajectoryProfile p = acceleration_pulse_profile(spec);
  EXPECT_NEAR(p.r_dot.back(), 0.0, 1e-12);
  EXPECT_GT(p.r.back(), 0.0);
  std::size_t ad = 0;
  for (Phase ph : p.phase) ad += ph == Phase::AD;
  EXPECT_GT(ad, 0u);
}

TEST(Pulses, RampTooLongRejected) {
  PulseProfileSpec spec;
  spec.pulses = {{0.0, 0.01, 1.0, 0.006}};
  EXPECT_THROW(acceleration_pulse_profile(spec), std::invalid_argument);
}

TEST(Trajectory, CsvHeaderAndRows) {
  ScanProfileSpec s;
  s.scan_length = 0.0;
  s.scan_velocity = 0.0;
  s.idle_time = 0.0002;
  s.hold_time = 0.0;
  const TrajectoryProfile p = generate_scan(s);
  const std::string csv = trajectory_csv(p);
  EXPECT_EQ(csv.rfind("t,r,r_dot,r_ddot,phase\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), p.size() + 1);
}

TEST(Trajectory, PhaseNamesRoundTrip) {
  for (Phase ph : {Phase::IP, Phase::AD, Phase::SP}) EXPECT_EQ(phase_from_string(to_string(ph)), ph);
  EXPECT_THROW(phase_from_string("XX"), std::invalid_argument);
}
