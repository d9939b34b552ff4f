#include <gtest/gtest.h>

#include <cmath>

#include "wafersim/config.hpp"
#include "wafersim/controllers.hpp"

using namespace wafersim;

namespace {

constexpr PhiForm kForms[] = {PhiForm::VariablePower, PhiForm::HalfPower, PhiForm::HalfPowerLinear};

double bound_residual(double k1, double k2, double a, double kappa, double gamma, double x) {
  return k1 * kappa * std::pow(x, a) - k2 * std::pow(x, 1.0 / a) + gamma;
}

}  // namespace

TEST(Alpha, Examples) {
  EXPECT_DOUBLE_EQ(alpha_exponent(0.0), 0.5);
  EXPECT_DOUBLE_EQ(alpha_exponent(1.0), 1.25);
  EXPECT_DOUBLE_EQ(alpha_exponent(-1.0), 1.25);
  EXPECT_GT(alpha_exponent(1e6), 1.999);
  EXPECT_LT(alpha_exponent(1e6), 2.0);
}

TEST(Phi, FirstNonlinearityExamples) {
  EXPECT_DOUBLE_EQ(phi1(1.0, PhiForm::VariablePower), 1.0);
  EXPECT_DOUBLE_EQ(phi1(0.25, PhiForm::HalfPowerLinear, 38.0), 10.0);
  EXPECT_DOUBLE_EQ(phi1(0.25, PhiForm::HalfPower), 0.5);
  for (PhiForm f : kForms) {
    for (double x : {1e-6, 0.3, 2.0, 400.0}) EXPECT_DOUBLE_EQ(phi1(-x, f, 38.0), -phi1(x, f, 38.0));
    EXPECT_EQ(phi1(0.0, f, 38.0), 0.0);
  }
}

TEST(Phi, SecondNonlinearityExamples) {
  EXPECT_DOUBLE_EQ(phi2(4.0, PhiForm::HalfPower), 0.5);
  EXPECT_DOUBLE_EQ(phi2(-4.0, PhiForm::HalfPower), -0.5);
  EXPECT_DOUBLE_EQ(phi2(1.0, PhiForm::VariablePower), 1.25);
  for (PhiForm f : kForms) EXPECT_EQ(phi2(0.0, f, 38.0), 0.0);
}

TEST(Phi, RatioMatchesFiniteDifference) {
  for (PhiForm f : kForms) {
    for (double m = 1e-3; m <= 1e3; m *= 1.37) {
      for (double s : {m, -m}) {
        const double d = 1e-5 * m;
        const double fd = (phi1(s + d, f, 38.0) - phi1(s - d, f, 38.0)) / (2.0 * d);
        const double ratio = phi2(s, f, 38.0) / phi1(s, f, 38.0);
        ASSERT_NEAR(ratio / fd, 1.0, 1e-6) << "form " << static_cast<int>(f) << ", s = " << s;
        ASSERT_NEAR(phi1_derivative(s, f, 38.0) / fd, 1.0, 1e-6);
      }
    }
  }
}

TEST(Phi, TinyArgumentsStayFinite) {
  for (double s : {1e-300, 1e-20, 1e-13, -1e-13}) {
    const double v = phi2(s, PhiForm::VariablePower);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_EQ(std::signbit(v), std::signbit(s));
  }
}

TEST(Gains, TheoremHandExample) {
  const Gains g = theorem_gains(2.0, -1.0, 1.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(g.h1, 6.0);
  EXPECT_DOUBLE_EQ(g.h2, 8.0);
  EXPECT_THROW(theorem_gains(2.0, 0.5, 1.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(theorem_gains(1.0, -1.0, 1.0, 1.0, 1.0), std::invalid_argument);
}

TEST(Gains, TheoremScheduleUsesBounds) {
  TheoremGainParams p;
  p.D1 = 0.5;
  p.D2 = 0.1;
  p.D3 = 0.01;
  p.D4 = 0.2;
  p.gamma = 0.04;
  const GainSchedule g = GainSchedule::theorem(p, PhiForm::HalfPower);
  EXPECT_DOUBLE_EQ(g.delta1(), 0.5 + 0.1 / 0.2);
  EXPECT_DOUBLE_EQ(g.delta2(-10.0), 0.01 * 10.0 + 0.2);
  const Gains at = g.compute(-10.0);
  const Gains direct = theorem_gains(2.0, -1.0, 1.0, 1.0, 0.3);
  EXPECT_DOUBLE_EQ(at.h1, direct.h1);
  EXPECT_DOUBLE_EQ(at.h2, direct.h2);
}

TEST(Gains, TheoremConstraintsRejected) {
  TheoremGainParams p;
  p.p2 = 1.0;
  EXPECT_THROW(GainSchedule::theorem(p, PhiForm::VariablePower), std::invalid_argument);
  p = {};
  p.p2 = 0.0;
  EXPECT_THROW(GainSchedule::theorem(p, PhiForm::VariablePower), std::invalid_argument);
  p = {};
  p.p1 = 1.0;  // p1 p4 = p2^2
  EXPECT_THROW(GainSchedule::theorem(p, PhiForm::VariablePower), std::invalid_argument);
  p = {};
  p.p1 = -2.0;
  EXPECT_THROW(GainSchedule::theorem(p, PhiForm::VariablePower), std::invalid_argument);
  p = {};
  p.gamma = 0.0;
  EXPECT_THROW(GainSchedule::theorem(p, PhiForm::VariablePower), std::invalid_argument);
}

TEST(Gains, AffineSchedules) {
  EXPECT_DOUBLE_EQ(GainSchedule::affine(550.0, 13.0, 10.0, 4.0).compute(0.0).h1, 13.0);
  EXPECT_DOUBLE_EQ(GainSchedule::affine(0.1, 50.0, 0.1, 10.0).compute(100.0).h1, 60.0);
  const Gains neg = GainSchedule::affine(0.1, 50.0, 0.1, 10.0).compute(-100.0);
  EXPECT_DOUBLE_EQ(neg.h1, 60.0);
  EXPECT_DOUBLE_EQ(neg.h2, 20.0);
  EXPECT_THROW(GainSchedule::affine(0.1, 0.0, 0.1, 10.0), std::invalid_argument);
  EXPECT_THROW(GainSchedule::constant(-1.0, 1.0), std::invalid_argument);
}

TEST(Gains, PositiveAlongAccelerationRange) {
  TheoremGainParams p;
  p.D2 = 0.1;
  p.D3 = 0.01;
  const GainSchedule sched[] = {GainSchedule::theorem(p, PhiForm::VariablePower),
                                GainSchedule::affine(550.0, 13.0, 10.0, 4.0), GainSchedule::constant(1500.0, 10.0)};
  for (const auto& g : sched) {
    for (double a = -20.0; a <= 20.0; a += 0.25) {
      const Gains h = g.compute(a);
      ASSERT_GT(h.h1, 0.0);
      ASSERT_GT(h.h2, 0.0);
    }
  }
}

TEST(Controller, QuiescentOutputIsZero) {
  for (ControllerFamily f : {ControllerFamily::CGSTA, ControllerFamily::VGSTA, ControllerFamily::VGPID,
                             ControllerFamily::FCGSTA, ControllerFamily::IFVSTA, ControllerFamily::PFVSTA}) {
    Controller c(default_controller(f), 1e-4);
    for (int k = 0; k < 100; ++k) ASSERT_EQ(c.step({}), 0.0) << to_string(f);
  }
}

TEST(Controller, ConstantGainSwitchingTerm) {
  ControllerSpec spec = default_controller(ControllerFamily::CGSTA);
  spec.surface.k2 = 1200.0;
  spec.gains = GainSchedule::constant(1500.0, 10.0);
  Controller c(spec, 1e-4);
  ControlInput in;
  in.e = 0.01 / 1200.0;  // s = k2 e = 0.01
  const double u = c.step(in);
  EXPECT_NEAR(c.last().s, 0.01, 1e-15);
  EXPECT_NEAR(c.last().u_sw, -37.5, 1e-9);
  EXPECT_NEAR(u, -37.5, 1e-9);
}

TEST(Controller, IntegratorAccumulatesSecondNonlinearity) {
  ControllerSpec spec = default_controller(ControllerFamily::CGSTA);
  spec.surface.k2 = 1200.0;
  spec.gains = GainSchedule::constant(1500.0, 10.0);
  const double h = 1e-4;
  Controller c(spec, h);
  ControlInput in;
  in.e = 0.01 / 1200.0;
  c.step(in);
  c.step(in);
  // z after one step = h * h2 / K_bar * phi2 = 1e-4 * 10 / 4 * 0.5
  EXPECT_NEAR(c.last().z, h * 10.0 / 4.0 * 0.5, 1e-18);
}

TEST(Controller, PidProportionalScheduling) {
  Controller c(default_controller(ControllerFamily::VGPID), 1e-4);
  ControlInput in;
  in.e = 1e-6;
  in.phase = Phase::SP;
  EXPECT_NEAR(c.step(in), -1.4, 1e-12);
  Controller d(default_controller(ControllerFamily::VGPID), 1e-4);
  in.phase = Phase::AD;
  EXPECT_NEAR(d.step(in), -1.7, 1e-12);
}

TEST(Controller, FeedforwardOnlyWhenEnabled) {
  ControlInput in;
  in.r_ddot = 4.0;
  Controller pf(default_controller(ControllerFamily::PFVSTA), 1e-4);
  Controller iff(default_controller(ControllerFamily::IFVSTA), 1e-4);
  EXPECT_DOUBLE_EQ(pf.step(in), 1.0);  // r_ddot / K_bar
  EXPECT_DOUBLE_EQ(iff.step(in), 0.0);
}

TEST(Controller, InconsistentSpecRejected) {
  ControllerSpec spec = default_controller(ControllerFamily::PFVSTA);
  spec.surface.family = SurfaceFamily::LSS;
  EXPECT_THROW(Controller(spec, 1e-4), std::invalid_argument);
  spec = default_controller(ControllerFamily::IFVSTA);
  spec.feedforward_enabled = true;
  EXPECT_THROW(Controller(spec, 1e-4), std::invalid_argument);
  EXPECT_THROW(controller_family_from_string("XSTA"), std::invalid_argument);
  EXPECT_EQ(controller_family_from_string("LVGSTA"), ControllerFamily::VGSTA);
}

TEST(ErrorBound, BracketAndResidual) {
  const ErrorBound b = error_bound_epsilon(8.0, 500.0, 0.5, 1.0, 1.0);
  ASSERT_TRUE(b.finite);
  EXPECT_GT(b.epsilon, 0.08);
  EXPECT_LT(b.epsilon, 0.085);
  EXPECT_LT(std::abs(bound_residual(8.0, 500.0, 0.5, 1.0, 1.0, b.epsilon)), 1e-9 * 500.0 * b.epsilon * b.epsilon);
  // Independent sign check of the bracket ends.
  EXPECT_GT(bound_residual(8.0, 500.0, 0.5, 1.0, 1.0, 0.08), 0.0);
  EXPECT_LT(bound_residual(8.0, 500.0, 0.5, 1.0, 1.0, 0.085), 0.0);
}

TEST(ErrorBound, ClosedFormWithoutMemoryGain) {
  for (double g : {1e-3, 0.5, 1.0, 7.0}) {
    const double eps = error_bound_epsilon(0.0, 500.0, 0.5, 1.0, g).epsilon;
    EXPECT_NEAR(eps, std::pow(g / 500.0, 0.5), 1e-10);
    EXPECT_NEAR(error_bound_epsilon(0.0, 500.0, 0.5, 1.0, 2.0 * g).epsilon / eps, std::pow(2.0, 0.5), 1e-12);
  }
  EXPECT_EQ(error_bound_epsilon(0.0, 500.0, 0.5, 1.0, 0.0).epsilon, 0.0);
}

TEST(ErrorBound, LinearCaseAndRejections) {
  EXPECT_NEAR(error_bound_epsilon(2.0, 10.0, 1.0, 1.0, 4.0).epsilon, 0.5, 1e-15);
  EXPECT_FALSE(error_bound_epsilon(20.0, 10.0, 1.0, 1.0, 4.0).finite);
  EXPECT_THROW(error_bound_epsilon(8.0, 0.0, 0.5, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(error_bound_epsilon(8.0, 500.0, 1.5, 1.0, 1.0), std::invalid_argument);
}

TEST(ErrorBound, RootResidualOverParameterGrid) {
  for (double k1 : {0.5, 8.0, 53.0}) {
    for (double a : {0.3, 0.5, 0.8}) {
      for (double gamma : {1e-4, 0.01, 1.0}) {
        const double eps = error_bound_epsilon(k1, 500.0, a, 1.0, gamma).epsilon;
        ASSERT_GT(eps, 0.0);
        ASSERT_LT(std::abs(bound_residual(k1, 500.0, a, 1.0, gamma, eps)), 1e-9 * 500.0 * std::pow(eps, 1.0 / a));
      }
    }
  }
}
