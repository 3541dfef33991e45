#pragma once

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

namespace fldt {

/// Standard normal CDF through erfc; absolute error well below 1e-12.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Kahan compensated accumulator. Keeps reductions order-stable and accurate
/// enough that degenerate Monte-Carlo means reproduce their summand to 1e-12.
class KahanSum {
 public:
  void add(double v) {
    const double y = v - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

/// Formats a double with 17 significant digits (round-trip exact).
inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace fldt
