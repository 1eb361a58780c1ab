#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mems/dielectric_model.hpp"
#include "mems/energy.hpp"
#include "mems/geometry.hpp"
#include "mems/potential_solver.hpp"
#include "mems/quadrature.hpp"

namespace mems {

struct ForceProfile {
  std::vector<double> g;
  std::vector<char> contact_branch;  // 1 where the coincidence formula was used
  // Additive parts of g: squared normal-derivative jump, bottom Robin coupling, datum term.
  std::vector<double> jump, robin, datum;

  double min() const { return *std::min_element(g.begin(), g.end()); }
};

inline ForceProfile compute_force(const DeflectionProfile& p, const DielectricModel& model,
                                  const PotentialField& f) {
  const int n = p.cells();
  const double H = p.H();
  require(static_cast<int>(f.owner.size()) == n + 1, "potential field does not match the profile grid");
  ForceProfile out;
  out.g.assign(n + 1, 0.0);
  out.contact_branch.assign(n + 1, 0);
  out.jump.assign(n + 1, 0.0);
  out.robin.assign(n + 1, 0.0);
  out.datum.assign(n + 1, 0.0);
  for (int i = 0; i <= n; ++i) {
    const double x = p.x(i), s = model.sigma(x).value;
    if (f.coincidence.in_contact(i)) {
      const HSample h = model.h(x, -H, -H);
      const FrakSample fr = model.frak_h(x, -H);
      out.contact_branch[i] = 1;
      out.jump[i] = 0.5 * h.dw * h.dw;
      out.robin[i] = s * (h.value - fr.value) * fr.dw;
      out.datum[i] = -0.5 * (h.dx * h.dx + (h.dz + h.dw) * (h.dz + h.dw));
    } else {
      if (!f.has_field(i)) throw SolverError("potential missing on non-contact node " + std::to_string(i));
      const double u = p[i], du = p.slope(i);
      const HSample h = model.h(x, u, u);
      const FrakSample fr = model.frak_h(x, u);
      const double psi_bot = f.bot_val[i] + model.h(x, -H, u).value;
      // d_z psi - d_z h - d_w h at the plate, with d_z psi = d_z chi + d_z h.
      const double jump = f.top_dz[i] - h.dw;
      out.jump[i] = 0.5 * (1.0 + du * du) * jump * jump;
      out.robin[i] = s * (psi_bot - fr.value) * fr.dw;
      out.datum[i] = -0.5 * (h.dx * h.dx + (h.dz + h.dw) * (h.dz + h.dw));
    }
    out.g[i] = out.jump[i] + out.robin[i] + out.datum[i];
  }
  return out;
}

// Gradient of the discrete E_e with respect to the interior nodal deflections, divided by the
// trapezoid weight so that it pairs like g. chi_h is stationary for F_h, so only the explicit
// geometric dependence of F_h at fixed nodal chi contributes; it is differentiated with a
// four-point central difference in u_i over the two adjacent cell columns. Contact nodes and
// the clamped ends keep the values of compute_force. Volume sources are not differentiated.
inline std::vector<double> discrete_energy_gradient(const DeflectionProfile& p, const DielectricModel& model,
                                                    const PotentialField& f, const ForceProfile& force) {
  const int n = p.cells();
  std::vector<double> out = force.g;
  for (int i = 1; i < n; ++i) {
    if (!f.has_field(i)) continue;
    const ComponentField& cf = f.components[f.owner[i]];
    const MappedMesh& m = cf.mesh;
    const int k = i - m.lo();
    const double g0 = m.gap(k);
    auto local = [&](double g) {
      double e = detail::node_robin(m, model, cf.chi, k, g);
      if (k > 0) e += detail::cell_field(m, model, cf.chi, k - 1, m.gap(k - 1), g);
      if (k < m.cells_x()) e += detail::cell_field(m, model, cf.chi, k, g, m.gap(k + 1));
      return e;
    };
    const double eps = 1e-3 * std::min(g0, p.H());
    const double d = (8.0 * (local(g0 + eps) - local(g0 - eps)) - (local(g0 + 2 * eps) - local(g0 - 2 * eps))) /
                     (12.0 * eps);
    out[i] = -d / p.dx();
  }
  return out;
}

// \int g theta with the trapezoid weights used by the energy module.
inline double force_pairing(const DeflectionProfile& p, const std::vector<double>& g,
                            const std::vector<double>& theta) {
  const std::vector<double> w = quad::trapezoid_weights(p.cells(), p.dx());
  double s = 0;
  for (int i = 0; i < p.nodes(); ++i) s += w[i] * g[i] * theta[i];
  return s;
}

struct DirectionalRow {
  double s = 0, fd = 0, pairing = 0, gap = 0;
};

// Forward-difference quotients of E_e along theta against the force pairing at u.
inline std::vector<DirectionalRow> directional_derivative_check(const DeflectionProfile& u,
                                                                const std::vector<double>& theta,
                                                                const DielectricModel& model,
                                                                const std::vector<double>& steps,
                                                                const PotentialOptions& opt = {}) {
  require(static_cast<int>(theta.size()) == u.nodes(), "direction has the wrong length");
  const PotentialField f0 = solve_potential(u, model, opt);
  const double e0 = electrostatic_energy(f0, model, u).total();
  const double pairing = force_pairing(u, compute_force(u, model, f0).g, theta);
  std::vector<DirectionalRow> rows;
  for (double s : steps) {
    std::vector<double> v = u.values();
    for (int i = 0; i < u.nodes(); ++i) {
      v[i] += s * theta[i];
      if (v[i] < -u.H())
        throw InvalidInput("perturbed profile violates the obstacle at node " + std::to_string(i) +
                           " for step " + std::to_string(s));
    }
    const DeflectionProfile us = u.with_values(std::move(v));
    const double es = electrostatic_energy(us, model, opt).total();
    DirectionalRow r;
    r.s = s;
    r.fd = (es - e0) / s;
    r.pairing = pairing;
    r.gap = std::abs(r.fd - pairing);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace mems
