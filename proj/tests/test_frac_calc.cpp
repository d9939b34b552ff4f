#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "wafersim/frac_calc.hpp"

using namespace wafersim;

namespace {

std::vector<double> run_operator(double order, double h, std::size_t window, const std::vector<double>& xs) {
  GLOperator op(order, h, window);
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(op.step(x));
  return out;
}

// Gamma oracle independent of the library: Lanczos (g = 7, n = 9) with reflection.
double lanczos_gamma(double x) {
  static const double c[] = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                             771.32342877765313,   -176.61502916214059,   12.507343278686905,
                             -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) return std::numbers::pi / (std::sin(std::numbers::pi * x) * lanczos_gamma(1.0 - x));
  x -= 1.0;
  double a = c[0];
  const double t = x + 7.5;
  for (int i = 1; i < 9; ++i) a += c[i] / (x + i);
  return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

}  // namespace

TEST(SigPow, Examples) {
  EXPECT_EQ(sig_pow(0.0, 0.5), 0.0);
  EXPECT_EQ(sig_pow(-0.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(sig_pow(-4.0, 0.5), -2.0);
  EXPECT_DOUBLE_EQ(sig_pow(0.25, 0.5), 0.5);
}

TEST(GammaFn, KnownValues) {
  EXPECT_DOUBLE_EQ(gamma_fn(1.0), 1.0);
  EXPECT_NEAR(gamma_fn(0.5), std::sqrt(std::numbers::pi), 1e-12);
  EXPECT_NEAR(gamma_fn(5.0), 24.0, 1e-12);
}

TEST(GammaFn, MatchesLanczosOracle) {
  for (double x = 0.05; x < 12.0; x += 0.37) {
    EXPECT_NEAR(gamma_fn(x) / lanczos_gamma(x), 1.0, 1e-12) << "x = " << x;
  }
}

TEST(GammaFn, RejectsNonPositive) {
  EXPECT_THROW(gamma_fn(0.0), std::invalid_argument);
  EXPECT_THROW(gamma_fn(-1.5), std::invalid_argument);
}

TEST(GLOperator, OrderZeroIsIdentity) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  GLOperator op(0.0, 1e-3, 100);
  for (int i = 0; i < 500; ++i) {
    const double x = u(rng);
    EXPECT_EQ(op.step(x), x);
  }
}

TEST(GLOperator, HalfIntegralOfConstant) {
  const double h = 1e-3;
  const std::vector<double> ones(1001, 1.0);
  const auto out = run_operator(-0.5, h, ones.size(), ones);
  const double exact = 1.0 / gamma_fn(1.5);  // t^0.5 / Gamma(1.5) at t = 1
  EXPECT_NEAR(out.back() / exact, 1.0, 0.01);
}

TEST(GLOperator, HalfDerivativeOfRamp) {
  const double h = 1e-3;
  std::vector<double> ramp(1001);
  for (std::size_t k = 0; k < ramp.size(); ++k) ramp[k] = static_cast<double>(k) * h;
  const auto out = run_operator(0.5, h, ramp.size(), ramp);
  const double exact = 1.0 / gamma_fn(1.5);  // Gamma(2) t^0.5 / Gamma(1.5) at t = 1
  EXPECT_NEAR(out.back() / exact, 1.0, 0.01);
}

TEST(GLOperator, WeightsFollowRecurrence) {
  const double order = 0.3;
  GLOperator op(order, 1e-3, 6);
  const auto w = op.weights();
  ASSERT_EQ(w.size(), 6u);
  double expect = 1.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (j > 0) expect *= (static_cast<double>(j) - 1.0 - order) / static_cast<double>(j);
    EXPECT_NEAR(w[j], expect, 1e-15);
  }
}

TEST(GLOperator, Linearity) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> f(2000), g(2000), mix(2000);
  const double a = 1.7, b = -0.4;
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = n(rng);
    g[k] = n(rng);
    mix[k] = a * f[k] + b * g[k];
  }
  for (double order : {-0.5, 0.5, -0.8}) {
    const auto of = run_operator(order, 1e-3, 700, f);
    const auto og = run_operator(order, 1e-3, 700, g);
    const auto om = run_operator(order, 1e-3, 700, mix);
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double want = a * of[k] + b * og[k];
      EXPECT_NEAR(om[k], want, 1e-12 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST(GLOperator, IntegralThenDerivativeRecoversStream) {
  const double h = 1e-4;
  const std::size_t n = 10001;
  std::vector<double> f(n);
  for (std::size_t k = 0; k < n; ++k) f[k] = 1.0 + std::sin(2.0 * std::numbers::pi * static_cast<double>(k) * h);
  const auto integral = run_operator(-0.5, h, n, f);
  const auto back = run_operator(0.5, h, n, integral);
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(back[k] - f[k]));
  EXPECT_LT(worst, 0.02 * 2.0);
}

TEST(GLOperator, IntegralBoundedByConstantTimesSup) {
  // |I^a f(t)| <= t^a / Gamma(1 + a) * sup|f| for the discrete sum with positive weights.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-3, a = 0.5;
  std::vector<double> f(1001);
  for (double& x : f) x = u(rng);
  const auto out = run_operator(-a, h, f.size(), f);
  double kappa = 0.0;
  for (double y : out) kappa = std::max(kappa, std::abs(y));
  EXPECT_TRUE(std::isfinite(kappa));
  EXPECT_LE(kappa, 1.0 / gamma_fn(1.0 + a) * 1.01);
}

TEST(GLOperator, ShortMemoryForgetsOldSamples) {
  const std::size_t window = 50;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> tail(window);
  for (double& x : tail) x = n(rng);
  std::vector<double> s1(120), s2(120);
  for (std::size_t k = 0; k < 120 - window; ++k) {
    s1[k] = n(rng);
    s2[k] = 10.0 * n(rng);
  }
  for (std::size_t k = 0; k < window; ++k) s1[120 - window + k] = s2[120 - window + k] = tail[k];
  const auto o1 = run_operator(-0.5, 1e-3, window, s1);
  const auto o2 = run_operator(-0.5, 1e-3, window, s2);
  EXPECT_DOUBLE_EQ(o1.back(), o2.back());
}

TEST(GLOperator, PeekDoesNotConsume) {
  GLOperator op(-0.5, 1e-3, 20);
  op.step(1.0);
  const double peeked = op.peek(2.0);
  EXPECT_EQ(op.history_size(), 1u);
  EXPECT_DOUBLE_EQ(op.step(2.0), peeked);
}

TEST(GLOperator, ResetClearsHistory) {
  GLOperator a(-0.5, 1e-3, 20), b(-0.5, 1e-3, 20);
  a.step(5.0);
  a.step(-2.0);
  a.reset();
  EXPECT_DOUBLE_EQ(a.step(1.0), b.step(1.0));
}

TEST(GLOperator, WindowForCoversDuration) {
  EXPECT_GE(static_cast<double>(window_for(1.0, 1e-4)) * 1e-4, 1.0);
  EXPECT_EQ(window_for(1.0, 1e-3), 1001u);
}
