#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "kfp/phase.hpp"

namespace kfp::test {

inline constexpr double kPi = std::numbers::pi;

/// C-infinity bump supported on |u| < 1, equal to 1 at 0.
inline double bump(double u) { return std::abs(u) < 1 ? std::exp(1 - 1 / (1 - u * u)) : 0.0; }

template <class F>
std::vector<double> sample(const VBox& box, F&& f) {
  std::vector<double> out(box.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(box.point(i));
  return out;
}

inline double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

}  // namespace kfp::test
