#include "wafersim/frac_calc.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace wafersim {

double sig_pow(double x, double a) {
  if (!std::isfinite(x) || !std::isfinite(a)) {
    throw std::invalid_argument("sig_pow: non-finite argument");
  }
  if (a <= 0.0) {
    throw std::invalid_argument("sig_pow: exponent must be positive, got " + std::to_string(a));
  }
  if (x == 0.0) return 0.0;
  if (a == 1.0) return x;
  return std::copysign(std::pow(std::abs(x), a), x);
}

double gamma_fn(double x) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw std::invalid_argument("gamma_fn: argument must be positive and finite");
  }
  return std::tgamma(x);
}

GLOperator::GLOperator(double order, double step, std::size_t window)
    : order_(order), step_(step) {
  if (!std::isfinite(order) || order < -1.0 || order > 1.0) {
    throw std::invalid_argument("GLOperator: order must lie in [-1, 1]");
  }
  if (!std::isfinite(step) || step <= 0.0) {
    throw std::invalid_argument("GLOperator: step must be positive");
  }
  if (window == 0) {
    throw std::invalid_argument("GLOperator: window must be at least 1");
  }
  scale_ = std::pow(step, -order);
  weights_.resize(window);
  weights_[0] = 1.0;
  for (std::size_t j = 1; j < window; ++j) {
    weights_[j] = weights_[j - 1] * (1.0 - (order + 1.0) / static_cast<double>(j));
  }
  history_.assign(window > 1 ? window - 1 : 1, 0.0);
}

double GLOperator::convolve(double newest) const {
  double acc = newest;  // w_0 == 1
  const std::size_t lags = std::min(count_, weights_.size() - 1);
  const std::size_t cap = history_.size();
  // history_[head_] is lag 1, history_[head_ - 1] lag 2, wrapping backwards.
  std::size_t first = std::min(lags, head_ + 1);
  for (std::size_t j = 0; j < first; ++j) {
    acc += weights_[j + 1] * history_[head_ - j];
  }
  for (std::size_t j = first; j < lags; ++j) {
    acc += weights_[j + 1] * history_[cap - 1 - (j - first)];
  }
  return scale_ * acc;
}

double GLOperator::peek(double sample) const {
  if (!std::isfinite(sample)) {
    throw std::invalid_argument("GLOperator: non-finite sample");
  }
  return convolve(sample);
}

double GLOperator::step(double sample) {
  const double out = peek(sample);
  if (weights_.size() > 1) {
    head_ = (count_ == 0) ? 0 : (head_ + 1) % history_.size();
    history_[head_] = sample;
  }
  ++count_;
  return out;
}

void GLOperator::reset() {
  std::fill(history_.begin(), history_.end(), 0.0);
  head_ = 0;
  count_ = 0;
}

std::size_t window_for(double memory_seconds, double step) {
  if (!(memory_seconds > 0.0) || !(step > 0.0)) {
    throw std::invalid_argument("window_for: memory and step must be positive");
  }
  return static_cast<std::size_t>(std::ceil(memory_seconds / step - 1e-9)) + 1;
}

}  // namespace wafersim
