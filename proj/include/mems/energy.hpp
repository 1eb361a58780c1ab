#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "mems/dielectric_model.hpp"
#include "mems/geometry.hpp"
#include "mems/potential_solver.hpp"
#include "mems/quadrature.hpp"

namespace mems {

namespace beam {

// Second difference at every node; the end values use the ghost node of the boundary mode
// (clamped: u_{-1} = u_1, pinned: u_{-1} = -u_1).
inline std::vector<double> second_difference(const DeflectionProfile& p) {
  const int n = p.cells();
  const double h2 = p.dx() * p.dx();
  const auto& u = p.values();
  std::vector<double> d(n + 1);
  for (int i = 1; i < n; ++i) d[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
  const double s = p.bc() == BcMode::clamped ? 2.0 : 0.0;
  d[0] = s * u[1] / h2;
  d[n] = s * u[n - 1] / h2;
  return d;
}

// ||u'||^2 from forward differences.
inline double slope_norm_sq(const DeflectionProfile& p) {
  const double h = p.dx();
  const auto& u = p.values();
  double s = 0;
  for (int i = 0; i < p.cells(); ++i) s += (u[i + 1] - u[i]) * (u[i + 1] - u[i]);
  return s / h;
}

// Fourth difference at interior nodes with the same ghost convention; zero at the ends.
inline std::vector<double> fourth_difference(const DeflectionProfile& p) {
  const int n = p.cells();
  const double h4 = std::pow(p.dx(), 4);
  const auto& u = p.values();
  const double g = p.bc() == BcMode::clamped ? 1.0 : -1.0;
  auto at = [&](int i) {
    if (i < 0) return g * u[-i];
    if (i > n) return g * u[2 * n - i];
    return u[i];
  };
  std::vector<double> d(n + 1, 0.0);
  for (int i = 1; i < n; ++i)
    d[i] = (at(i - 2) - 4.0 * at(i - 1) + 6.0 * at(i) - 4.0 * at(i + 1) + at(i + 2)) / h4;
  return d;
}

inline double penalty_norm_sq(const DeflectionProfile& p, double k) {
  const std::vector<double> w = quad::trapezoid_weights(p.cells(), p.dx());
  double s = 0;
  for (int i = 0; i < p.nodes(); ++i) {
    const double e = std::max(p[i] - k, 0.0);
    s += w[i] * e * e;
  }
  return s;
}

}  // namespace beam

struct MechanicalEnergy {
  double bending = 0, stretching = 0, self_stretching = 0;
  double total() const { return bending + stretching + self_stretching; }
};

// Trapezoid-weighted squared second differences and forward-difference slopes, so that the
// gradient of the discrete energy is exactly dx * (beta D4 u - (tau + alpha ||u'||^2) D2 u).
inline MechanicalEnergy mechanical_energy(const DeflectionProfile& p, double beta, double tau, double alpha) {
  const std::vector<double> d2 = beam::second_difference(p);
  const std::vector<double> w = quad::trapezoid_weights(p.cells(), p.dx());
  double b = 0;
  for (int i = 0; i < p.nodes(); ++i) b += w[i] * d2[i] * d2[i];
  const double s = beam::slope_norm_sq(p);
  return {0.5 * beta * b, 0.5 * tau * s, 0.25 * alpha * s * s};
}

struct ElectrostaticEnergy {
  double field = 0;  // -1/2 \int |grad psi|^2
  double robin = 0;  // -1/2 \int sigma (psi(.,-H) - frak h)^2, contact nodes included
  double total() const { return field + robin; }
};

// Bottom term of contact nodes, where psi(x,-H) is replaced by h(x,-H,-H).
inline double contact_robin(const PotentialField& f, const DielectricModel& model, const DeflectionProfile& p) {
  const std::vector<double> w = quad::trapezoid_weights(p.cells(), p.dx());
  const double H = p.H();
  double s = 0;
  for (int i = 0; i <= p.cells(); ++i) {
    if (f.has_field(i)) continue;
    const double x = p.x(i);
    const double r = model.h(x, -H, -H).value - model.frak_h(x, -H).value;
    s += 0.5 * w[i] * model.sigma(x).value * r * r;
  }
  return s;
}

inline ElectrostaticEnergy electrostatic_energy(const PotentialField& f, const DielectricModel& model,
                                                const DeflectionProfile& p) {
  const FunctionalParts g = f.functional();
  return {-g.field, -g.robin - contact_robin(f, model, p)};
}

inline ElectrostaticEnergy electrostatic_energy(const DeflectionProfile& p, const DielectricModel& model,
                                                const PotentialOptions& opt = {}) {
  return electrostatic_energy(solve_potential(p, model, opt), model, p);
}

struct EnergyReport {
  MechanicalEnergy mechanical;
  ElectrostaticEnergy electrostatic;
  double E_m = 0, E_e = 0, E_total = 0;
  double penalty = 0;
  std::optional<double> k;
  double E_k = 0;
};

inline EnergyReport make_report(const DeflectionProfile& p, const ElectrostaticEnergy& ee,
                                const ModelConstants& c, std::optional<double> k) {
  if (k) require(*k >= c.H, "penalty level k must satisfy k >= H");
  EnergyReport r;
  r.mechanical = mechanical_energy(p, c.beta, c.tau, c.alpha);
  r.electrostatic = ee;
  r.E_m = r.mechanical.total();
  r.E_e = ee.total();
  r.E_total = r.E_m + r.E_e;
  r.k = k;
  r.penalty = k ? 0.5 * c.A * beam::penalty_norm_sq(p, *k) : 0.0;
  r.E_k = r.E_total + r.penalty;
  return r;
}

inline EnergyReport total_energy(const DeflectionProfile& p, const DielectricModel& model,
                                 const ModelConstants& c, std::optional<double> k,
                                 const PotentialOptions& opt = {}) {
  if (k) require(*k >= c.H, "penalty level k must satisfy k >= H");
  return make_report(p, electrostatic_energy(p, model, opt), c, k);
}

// Lower-bound constant c(k) of the penalized energy:
// E_k(u) >= beta/4 ||u''||^2 + A/4 ||(u-k)_+||^2 - c(k).
inline double coercivity_constant(const ModelConstants& c, double k) {
  const double D = 2.0 * c.L, K2 = c.K * c.K;
  return 2.0 * (1.0 + c.sigma_bar) * D * K2 + 2.0 * k * k * D * (K2 * K2 / c.beta + 2.0 * K2);
}

}  // namespace mems
