#include <gtest/gtest.h>

#include <cmath>

#include "wafersim/plant.hpp"

using namespace wafersim;

namespace {

PlantParams stage(double K, double T_v) {
  PlantParams p;
  p.K = K;
  p.T_v = T_v;
  return p;
}

PlantState advance(PlantState s, const PlantParams& p, const DisturbanceSpec& d, double u, double h, double until) {
  const auto n = static_cast<long>(std::llround(until / h));
  for (long k = 0; k < n; ++k) s = plant_step(s, p, d, u, h, 1);
  return s;
}

}  // namespace

TEST(Plant, RestStaysAtRest) {
  PlantState s;
  s.p = 0.3;
  const PlantState out = plant_step(s, stage(3.9124, 1.092), {}, 0.0, 1e-3, 10);
  EXPECT_EQ(out.p, 0.3);
  EXPECT_EQ(out.v, 0.0);
  EXPECT_NEAR(out.t, 1e-3, 1e-15);
}

TEST(Plant, StepResponseApproachesGainRatio) {
  const double K = 3.9124, T_v = 1.092;
  const PlantState s = advance({}, stage(K, T_v), {}, 1.0, 1e-3, 5.0 / T_v);
  EXPECT_NEAR(s.v / (K / T_v), 1.0, 0.01);
}

TEST(Plant, VelocityFixedPoint) {
  PlantState s;
  s.v = 1.0;
  const PlantParams p = stage(4.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    s = plant_step(s, p, {}, 0.25, 1e-3, 2);
    ASSERT_NEAR(s.v, 1.0, 1e-14);
  }
}

TEST(Plant, MatchesFirstOrderSolution) {
  const double K = 3.9124, T_v = 1.092, u = 0.7, v0 = -0.2, h = 1e-4;
  const PlantParams p = stage(K, T_v);
  PlantState s;
  s.v = v0;
  for (int k = 1; k <= 20000; ++k) {
    s = plant_step(s, p, {}, u, h, 1);
    if (k % 1000 == 0) {
      const double t = k * h;
      const double exact = std::exp(-T_v * t) * v0 + K * u / T_v * (1.0 - std::exp(-T_v * t));
      ASSERT_NEAR(s.v, exact, 1e-6 * std::abs(exact)) << "t = " << t;
    }
  }
}

TEST(Plant, PositionIsIntegralOfVelocity) {
  // Trapezoid of sampled v against p: the mismatch shrinks as O(h^2).
  auto worst = [](double h) {
    const PlantParams p = stage(3.9124, 1.092);
    PlantState s;
    double trap = 0.0, err = 0.0;
    for (int k = 0; k < static_cast<int>(std::llround(1.0 / h)); ++k) {
      const double u = std::sin(3.0 * k * h);
      const PlantState next = plant_step(s, p, {}, u, h, 4);
      trap += 0.5 * h * (s.v + next.v);
      s = next;
      err = std::max(err, std::abs(s.p - trap));
    }
    return err;
  };
  const double coarse = worst(1e-2), fine = worst(5e-3);
  EXPECT_LT(fine, coarse / 3.0);
  EXPECT_LT(worst(1e-4), 1e-8);
}

TEST(Plant, StepDisturbanceLatches) {
  DisturbanceSpec d;
  d.step_amplitude = 0.1;
  d.step_trigger_position = 0.01;
  const PlantParams p = stage(4.0, 1.0);
  PlantState s;
  s.v = 0.1;
  bool seen = false;
  for (int k = 0; k < 400; ++k) {
    const double u = k < 200 ? 0.025 : -0.5;  // out past the trigger, then back
    s = plant_step(s, p, d, u, 1e-3, 2);
    if (s.step_latched) seen = true;
    if (seen) {
      ASSERT_TRUE(s.step_latched);
      ASSERT_DOUBLE_EQ(disturbance_at(d, s), 0.1);
    }
  }
  EXPECT_TRUE(seen);
  EXPECT_LT(s.p, 0.01);
}

TEST(Plant, DisturbanceTerms) {
  DisturbanceSpec d;
  d.constant = 0.02;
  d.ripple_amplitude = 0.05;
  d.ripple_period = 0.016;
  d.friction_residual = 0.01;
  PlantState s;
  s.p = 0.004;  // quarter period
  s.v = 1.0;
  EXPECT_NEAR(disturbance_at(d, s), 0.02 + 0.05 - 0.01, 1e-15);
  s.v = -1.0;
  EXPECT_NEAR(disturbance_at(d, s), 0.02 + 0.05 + 0.01, 1e-15);
}

TEST(Plant, DivergenceIsReported) {
  PlantLimits lim;
  lim.max_speed = 1.0;
  EXPECT_THROW(plant_step({}, stage(4.0, 1.0), {}, 1e3, 1e-2, 1, lim), PlantDivergence);
  EXPECT_THROW(plant_step({}, stage(4.0, 1.0), {}, std::nan(""), 1e-2, 1), PlantDivergence);
}

TEST(Plant, ValidationAndPhysicalParams) {
  EXPECT_THROW(stage(-1.0, 1.0).validate(), std::invalid_argument);
  PhysicalParams phys{2.0, 3.0, 8.0};
  const PlantParams p = PlantParams::from_physical(phys, 4.0, 1.0);
  EXPECT_DOUBLE_EQ(p.K, 4.0);
  EXPECT_DOUBLE_EQ(p.T_v, 1.5);
}

TEST(Measurement, NoiselessIsExact) {
  MeasurementChannel ch({}, 1e4);
  PlantState s;
  s.p = 0.123456789;
  EXPECT_EQ(ch.measure(s), s.p);
}

TEST(Measurement, SameSeedSameStream) {
  NoiseSpec n;
  n.power = 1e-18;
  n.cutoff = 2000.0;
  n.seed = 42;
  MeasurementChannel a(n, 1e4), b(n, 1e4);
  PlantState s;
  for (int k = 0; k < 1000; ++k) ASSERT_EQ(a.measure(s), b.measure(s));
}

TEST(Measurement, WhiteVarianceMatchesPower) {
  NoiseSpec n;
  n.power = 4e-18;
  n.cutoff = 1e9;  // above Nyquist: filter bypassed
  MeasurementChannel ch(n, 1e4);
  EXPECT_EQ(ch.smoothing(), 1.0);
  PlantState s;
  s.p = 1.0;
  double sum = 0.0, sq = 0.0;
  const int N = 1000000;
  for (int k = 0; k < N; ++k) {
    const double x = ch.measure(s) - s.p;
    sum += x;
    sq += x * x;
  }
  const double mean = sum / N;
  const double var = sq / N - mean * mean;
  EXPECT_NEAR(var / n.power, 1.0, 0.05);
}
