#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wafersim {

/// sgn(x)|x|^a, exactly zero at the origin.
double sig_pow(double x, double a);

/// Gamma function for positive arguments.
double gamma_fn(double x);

/**
 * Grünwald–Letnikov operator with a short-memory window.
 *
 * A positive order differentiates, a negative order integrates and order 0 is
 * the identity. Each call to step() consumes one sample taken at a fixed step
 * and returns
 *
 *     step^(-order) * sum_{j=0}^{min(n, window-1)} w_j f(t_n - j*step)
 *
 * with w_0 = 1, w_j = w_{j-1} (1 - (order + 1) / j). Samples before the first
 * call are taken as zero.
 */
class GLOperator {
 public:
  GLOperator(double order, double step, std::size_t window);

  double step(double sample);

  /// Output the operator would return for `sample` without consuming it.
  double peek(double sample) const;

  void reset();

  double order() const { return order_; }
  double step_size() const { return step_; }
  std::size_t window() const { return weights_.size(); }
  std::size_t history_size() const { return count_ < weights_.size() ? count_ : weights_.size(); }
  std::span<const double> weights() const { return weights_; }

 private:
  double convolve(double newest) const;

  double order_;
  double step_;
  double scale_;
  std::vector<double> weights_;
  // Ring buffer of the last window-1 samples; head_ is the slot of the newest.
  std::vector<double> history_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

/// Smallest window giving at least `memory_seconds` of history at `step`.
std::size_t window_for(double memory_seconds, double step);

}  // namespace wafersim
