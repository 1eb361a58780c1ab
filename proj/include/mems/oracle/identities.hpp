#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "mems/error.hpp"
#include "mems/oracle/jet.hpp"
#include "mems/quadrature.hpp"

namespace mems::oracle {

using Field2 = std::function<Jet(const Jet& x, const Jet& y)>;
using Curve = std::function<Jet(const Jet& x)>;

inline Curve constant_curve(double c) {
  return [c](const Jet&) { return Jet::constant(c); };
}

// Z(eta; mu) = (1 - eta)(1 + (1 + mu) sin eta): Z(1) = 0 and Z'(0) = mu Z(0) for every mu.
inline Jet robin_profile(const Jet& eta, const Jet& mu) { return (1.0 - eta) * (1.0 + (1.0 + mu) * sin(eta)); }

// phi(x, eta) = amplitude sin(k pi (x-a)/(b-a)) Z(eta; mu(x)) on the rectangle (a,b) x (0,1).
inline Field2 robin_family(double a, double b, int k, Curve mu, double amplitude = 1.0) {
  return [=](const Jet& x, const Jet& eta) {
    return amplitude * sin(k * std::numbers::pi * (x - a) / (b - a)) * robin_profile(eta, mu(x));
  };
}

struct IdentityResidual {
  double lhs = 0;        // \int d_xx phi d_yy phi
  double mixed = 0;      // \int |d_xy phi|^2
  double boundary = 0;   // bottom-edge term
  double curvature = 0;  // -1/2 \int v'' |d_z zeta(., v)|^2 (mapped check only)
  double residual = 0;   // |lhs - mixed - boundary - curvature|
};

namespace detail {

inline double bc_scale(double v) { return std::max(1.0, std::abs(v)); }

// Throws unless phi vanishes on x = a, x = b, eta = 1 and satisfies -phi_eta + mu phi = 0 at eta = 0.
inline void check_rect_bcs(const Field2& phi, const Curve& mu, double a, double b) {
  constexpr int n = 24;
  double worst = 0, scale = 1.0;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    const double x = a + (b - a) * t;
    const Jet bot = phi(Jet::var_x(x), Jet::var_y(0.0));
    scale = std::max(scale, bc_scale(bot.v) + bc_scale(bot.dy));
    worst = std::max({worst, std::abs(phi(Jet::constant(a), Jet::constant(t)).v),
                      std::abs(phi(Jet::constant(b), Jet::constant(t)).v),
                      std::abs(phi(Jet::constant(x), Jet::constant(1.0)).v),
                      std::abs(-bot.dy + mu(Jet::constant(x)).v * bot.v)});
  }
  if (worst > 1e-10 * scale)
    throw InvalidInput("test function violates the rectangle boundary conditions (residual " +
                       std::to_string(worst) + ")");
}

}  // namespace detail

// Composite Simpson on an N x N grid of (a,b) x (0,1); N even.
inline IdentityResidual identity_check_rect(const Curve& mu, const Field2& phi, double a, double b, int N) {
  require(b > a, "identity check needs a < b");
  require(N >= 2 && N % 2 == 0, "identity check needs an even N");
  detail::check_rect_bcs(phi, mu, a, b);
  const std::vector<double> wx = quad::simpson_weights(N, (b - a) / N);
  const std::vector<double> we = quad::simpson_weights(N, 1.0 / N);
  IdentityResidual r;
  for (int i = 0; i <= N; ++i) {
    const double x = a + (b - a) * i / N;
    for (int j = 0; j <= N; ++j) {
      const Jet p = phi(Jet::var_x(x), Jet::var_y(static_cast<double>(j) / N));
      r.lhs += wx[i] * we[j] * p.dxx * p.dyy;
      r.mixed += wx[i] * we[j] * p.dxy * p.dxy;
    }
    const Jet p0 = phi(Jet::var_x(x), Jet::var_y(0.0));
    const Jet m = mu(Jet::var_x(x));
    r.boundary += wx[i] * p0.dx * (m.dx * p0.v + m.v * p0.dx);
  }
  r.residual = std::abs(r.lhs - r.mixed - r.boundary);
  return r;
}

// zeta(x, z) = Phi(x, (H+z)/(H+v(x))) on O = {a < x < b, -H < z < v(x)}. Phi is a rectangle
// family whose Robin coefficient is mu = sigma (H + v).
inline Field2 mapped_function(const Field2& Phi, const Curve& v, double H) {
  return [=](const Jet& x, const Jet& z) { return Phi(x, (H + z) / (H + v(x))); };
}

// Integrates over the mapped domain with Simpson in (x, eta) and Jacobian H + v.
inline IdentityResidual identity_check_mapped(const Curve& v, const Curve& sigma, const Field2& zeta, double H,
                                              double a, double b, int N) {
  require(b > a, "identity check needs a < b");
  require(N >= 2 && N % 2 == 0, "identity check needs an even N");
  const std::vector<double> wx = quad::simpson_weights(N, (b - a) / N);
  const std::vector<double> we = quad::simpson_weights(N, 1.0 / N);
  // Boundary conditions of zeta: zero on the graph and the sides, Robin with sigma at the bottom.
  {
    double worst = 0;
    for (int i = 0; i <= N; i += std::max(1, N / 16)) {
      const double x = a + (b - a) * i / N;
      const double G = H + v(Jet::constant(x)).v;
      require(G > 0.0, "mapped identity needs H + v > 0");
      const Jet bot = zeta(Jet::var_x(x), Jet::var_y(-H));
      worst = std::max({worst, std::abs(zeta(Jet::constant(x), Jet::constant(-H + G)).v),
                        std::abs(-bot.dy + sigma(Jet::constant(x)).v * bot.v),
                        std::abs(zeta(Jet::constant(a), Jet::constant(-H + G * i / N)).v),
                        std::abs(zeta(Jet::constant(b), Jet::constant(-H + G * i / N)).v)});
    }
    if (worst > 1e-10) throw InvalidInput("mapped test function violates its boundary conditions");
  }
  IdentityResidual r;
  for (int i = 0; i <= N; ++i) {
    const double x = a + (b - a) * i / N;
    const Jet vx = v(Jet::var_x(x));
    const double G = H + vx.v;
    for (int j = 0; j <= N; ++j) {
      const double z = -H + G * j / N;
      const Jet p = zeta(Jet::var_x(x), Jet::var_y(z));
      const double w = wx[i] * we[j] * G;
      r.lhs += w * p.dxx * p.dyy;
      r.mixed += w * p.dxy * p.dxy;
    }
    const Jet p0 = zeta(Jet::var_x(x), Jet::var_y(-H));
    const Jet s = sigma(Jet::var_x(x));
    r.boundary += wx[i] * p0.dx * (s.dx * p0.v + s.v * p0.dx);
    const Jet pt = zeta(Jet::var_x(x), Jet::var_y(vx.v));
    r.curvature += -0.5 * wx[i] * vx.dxx * pt.dy * pt.dy;
  }
  r.residual = std::abs(r.lhs - r.mixed - r.boundary - r.curvature);
  return r;
}

}  // namespace mems::oracle
