#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mems/dielectric_model.hpp"
#include "mems/geometry.hpp"

namespace mems::test {

inline DielectricModel unit_model(double V = 1.0, double sigma = 1.0, double H = 1.0, double L = 1.0,
                                  double K = 1.0) {
  return make_example_model(V, Sigma::constant(sigma), H, L, K);
}

inline DeflectionProfile bump(double amplitude, int nx = 128, double L = 1.0, double H = 1.0,
                              BcMode bc = BcMode::clamped) {
  return DeflectionProfile::from_function(
      L, H, nx,
      [=](double x) {
        const double q = 1.0 - (x / L) * (x / L);
        return amplitude * q * q;
      },
      bc);
}

// Smooth admissible profile; with clip_contact, values below -H are clipped to -H.
inline DeflectionProfile random_profile(std::mt19937_64& rng, int nx, double H = 1.0, bool clip_contact = false) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double amp = clip_contact ? -H * (1.05 + 0.6 * U(rng)) : H * (-0.9 + 2.0 * U(rng));
  const double wig = 0.4 * (U(rng) - 0.5), shift = 0.3 * (U(rng) - 0.5);
  const int m = 1 + static_cast<int>(3 * U(rng));
  return DeflectionProfile::from_function(1.0, H, nx, [=](double x) {
    const double q = 1.0 - x * x;
    const double v = amp * q * q * (1.0 + wig * std::sin(m * M_PI * (x + shift)));
    return std::max(v, -H);
  });
}

}  // namespace mems::test
