#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "mems/error.hpp"

namespace mems::quad {

// Two-point Gauss rule on [0,1].
inline constexpr double kGaussLo = 0.5 - 0.28867513459481287;  // 1/(2*sqrt(3))
inline constexpr double kGaussHi = 0.5 + 0.28867513459481287;
inline constexpr std::array<double, 2> kGauss2 = {kGaussLo, kGaussHi};

// Three-point Gauss rule on [0,1]: nodes and weights.
inline constexpr std::array<double, 3> kGauss3Nodes = {0.5 - 0.3872983346207417, 0.5,
                                                       0.5 + 0.3872983346207417};
inline constexpr std::array<double, 3> kGauss3Weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

// Composite trapezoid weights for n cells of width h (n+1 nodes).
inline std::vector<double> trapezoid_weights(int n, double h) {
  require(n >= 1, "trapezoid rule needs at least one cell");
  std::vector<double> w(n + 1, h);
  w.front() = w.back() = 0.5 * h;
  return w;
}

// Composite Simpson weights; n must be even.
inline std::vector<double> simpson_weights(int n, double h) {
  require(n >= 2 && n % 2 == 0, "Simpson rule needs an even number of cells");
  std::vector<double> w(n + 1);
  for (int i = 0; i <= n; ++i) w[i] = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
  for (double& wi : w) wi *= h / 3.0;
  return w;
}

}  // namespace mems::quad
