#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "mems/dielectric_model.hpp"
#include "mems/error.hpp"
#include "mems/geometry.hpp"
#include "mems/quadrature.hpp"

namespace mems {

using SourceFn = std::function<double(double x, double z)>;

struct PotentialOptions {
  int n_eta = 128;
  double gap_threshold = -1.0;  // negative: 1e-8 * H
  SourceFn source;              // optional volume load f, enters as + \int f phi
  long direct_limit = 500000;   // unknowns above which CG replaces the direct factorization
  double cg_tolerance = 1e-10;

  double threshold_for(double H) const { return gap_threshold < 0.0 ? 1e-8 * H : gap_threshold; }
};

// Unknowns are the interior x-nodes of a component mesh times eta rows 0..N_eta-1;
// the lateral edges and the top row are Dirichlet.
struct NodeNumbering {
  int cells_x = 0, n_eta = 0;
  int size() const { return (cells_x - 1) * n_eta; }
  int operator()(int k, int j) const {
    if (k <= 0 || k >= cells_x || j >= n_eta) return -1;
    return (k - 1) * n_eta + j;
  }
};

struct LinearSystem {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
  NodeNumbering numbering;
};

namespace detail {

// Bilinear shape functions on [0,1]^2, node order (0,0), (1,0), (0,1), (1,1).
struct Shape {
  std::array<double, 4> n, ds, dt;
};

inline Shape bilinear(double s, double t) {
  return {{(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t},
          {-(1 - t), (1 - t), -t, t},
          {-(1 - s), -s, (1 - s), s}};
}

inline constexpr std::array<int, 4> kDk = {0, 1, 0, 1};
inline constexpr std::array<int, 4> kDj = {0, 0, 1, 1};

// Gradient of the lifted datum h_v in physical coordinates at a quadrature point.
struct DatumGrad {
  double px = 0, pz = 0;
};

inline DatumGrad datum_grad(const MappedMesh& m, const DielectricModel& model, int k, int a, int j,
                            int b) {
  const double x = m.quad_x(k, a);
  const double v = -m.H() + m.quad_gap(k, a);
  const HSample s = model.h(x, m.quad_z(k, a, j, b), v);
  return {s.dx + s.dw * m.cell_slope(k), s.dz};
}

}  // namespace detail

inline LinearSystem assemble(const MappedMesh& m, const DielectricModel& model,
                             const SourceFn& source = {}) {
  const int nc = m.cells_x(), ne = m.cells_eta();
  LinearSystem sys;
  sys.numbering = {nc, ne};
  const int n = sys.numbering.size();
  if (n <= 0) throw SolverError("component mesh has no interior unknowns");
  sys.rhs = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(nc) * ne * 16 + nc);
  const double dx = m.dx(), de = m.deta(), w = 0.25 * dx * de;

  std::array<detail::Shape, 4> shapes;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) shapes[2 * a + b] = detail::bilinear(quad::kGauss2[a], quad::kGauss2[b]);

  for (int k = 0; k < nc; ++k) {
    for (int j = 0; j < ne; ++j) {
      std::array<int, 4> idx;
      for (int q = 0; q < 4; ++q) idx[q] = sys.numbering(k + detail::kDk[q], j + detail::kDj[q]);
      std::array<std::array<double, 4>, 4> ke{};
      std::array<double, 4> fe{};
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const detail::Shape& sh = shapes[2 * a + b];
          const Metric g = m.metric(k, a, j, b);
          const detail::DatumGrad p = detail::datum_grad(m, model, k, a, j, b);
          const double qx = g.a11 * p.px, qe = g.a12 * p.px + p.pz;
          double f = 0.0;
          if (source) f = source(m.quad_x(k, a), m.quad_z(k, a, j, b)) * m.quad_gap(k, a);
          for (int r = 0; r < 4; ++r) {
            const double gxr = sh.ds[r] / dx, ger = sh.dt[r] / de;
            fe[r] -= w * (gxr * qx + ger * qe);
            fe[r] += w * f * sh.n[r];
            for (int c = 0; c < 4; ++c) {
              const double gxc = sh.ds[c] / dx, gec = sh.dt[c] / de;
              ke[r][c] += w * (g.a11 * gxr * gxc + g.a12 * (gxr * gec + ger * gxc) + g.a22 * ger * gec);
            }
          }
        }
      }
      for (int r = 0; r < 4; ++r) {
        if (idx[r] < 0) continue;
        sys.rhs(idx[r]) += fe[r];
        for (int c = 0; c < 4; ++c)
          if (idx[c] >= 0) trip.emplace_back(idx[r], idx[c], ke[r][c]);
      }
    }
  }
  // Lumped Robin term on the bottom edge; interior x-nodes carry the full trapezoid weight.
  for (int k = 1; k < nc; ++k) {
    const double x = m.x(k), v = -m.H() + m.gap(k);
    const double s = model.sigma(x).value;
    const int id = sys.numbering(k, 0);
    trip.emplace_back(id, id, dx * s);
    sys.rhs(id) -= dx * s * (model.h(x, -m.H(), v).value - model.frak_h(x, v).value);
  }
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(trip.begin(), trip.end());
  return sys;
}

struct SolveStats {
  std::string method;
  int iterations = 0;
  double residual = 0;  // relative, ||A x - b|| / ||b||
  int unknowns = 0;
};

// Discrete Dirichlet functional split into field and bottom parts.
struct FunctionalParts {
  double field = 0, robin = 0;
  double total() const { return field + robin; }
};

struct ComponentField {
  MappedMesh mesh;
  std::vector<double> chi;  // (cells_x+1) x (n_eta+1), eta fastest; Dirichlet entries are 0
  SolveStats stats;
  FunctionalParts functional;

  double at(int k, int j) const { return chi[static_cast<std::size_t>(k) * (mesh.cells_eta() + 1) + j]; }
};

namespace detail {

// Field contribution of cell column k with the node gaps gl, gr in place of the mesh gaps.
// Both the functional and its geometric derivative go through this one function.
inline double cell_field(const MappedMesh& m, const DielectricModel& model, const std::vector<double>& chi, int k,
                         double gl, double gr) {
  const int ne = m.cells_eta();
  const double dx = m.dx(), de = m.deta(), w = 0.25 * dx * de, H = m.H();
  const double slope = (gr - gl) / dx;
  auto at = [&](int kk, int j) { return chi[static_cast<std::size_t>(kk) * (ne + 1) + j]; };
  double e = 0;
  for (int a = 0; a < 2; ++a) {
    const double t = quad::kGauss2[a];
    const double G = (1.0 - t) * gl + t * gr;
    const double x = m.x(k) + t * dx, v = -H + G;
    for (int j = 0; j < ne; ++j) {
      const std::array<double, 4> c = {at(k, j), at(k + 1, j), at(k, j + 1), at(k + 1, j + 1)};
      for (int b = 0; b < 2; ++b) {
        const Shape sh = bilinear(t, quad::kGauss2[b]);
        double cx = 0, ce = 0;
        for (int r = 0; r < 4; ++r) {
          cx += c[r] * sh.ds[r] / dx;
          ce += c[r] * sh.dt[r] / de;
        }
        const double eta = m.quad_eta(j, b);
        const double gx = cx - eta * slope / G * ce, gz = ce / G;
        const HSample hs = model.h(x, -H + eta * G, v);
        const double px = hs.dx + hs.dw * slope, pz = hs.dz;
        e += 0.5 * w * G * ((gx + px) * (gx + px) + (gz + pz) * (gz + pz));
      }
    }
  }
  return e;
}

// Lumped bottom contribution of local node k at gap g (zero for bounding contact nodes).
inline double node_robin(const MappedMesh& m, const DielectricModel& model, const std::vector<double>& chi, int k,
                         double g) {
  if (!m.owns(k)) return 0.0;
  const double x = m.x(k), v = -m.H() + g;
  const double s = model.sigma(x).value;
  const double r = chi[static_cast<std::size_t>(k) * (m.cells_eta() + 1)] + model.h(x, -m.H(), v).value -
                   model.frak_h(x, v).value;
  return 0.5 * m.bottom_weight(k) * s * r * r;
}

}  // namespace detail

// Field part 1/2 sum G |grad(chi + h_v)|^2 over Gauss points plus the lumped bottom part
// 1/2 sum w_i sigma_i (chi + h_v - frak h_v)^2 over nodes owned by the component.
inline FunctionalParts discrete_functional(const MappedMesh& m, const DielectricModel& model,
                                           const std::vector<double>& chi) {
  FunctionalParts f;
  for (int k = 0; k < m.cells_x(); ++k) f.field += detail::cell_field(m, model, chi, k, m.gap(k), m.gap(k + 1));
  for (int k = 0; k <= m.cells_x(); ++k) f.robin += detail::node_robin(m, model, chi, k, m.gap(k));
  return f;
}

inline Eigen::VectorXd solve_system(const LinearSystem& sys, const PotentialOptions& opt, SolveStats& st) {
  const Eigen::Index n = sys.matrix.rows();
  st.unknowns = static_cast<int>(n);
  Eigen::VectorXd x;
  if (n <= opt.direct_limit) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(sys.matrix);
    if (ldlt.info() != Eigen::Success) throw SolverError("sparse LDLT factorization failed");
    x = ldlt.solve(sys.rhs);
    st.method = "ldlt";
    st.iterations = 1;
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg(sys.matrix);
    cg.setTolerance(opt.cg_tolerance);
    cg.setMaxIterations(static_cast<Eigen::Index>(10 * n));
    x = cg.solve(sys.rhs);
    st.method = "cg";
    st.iterations = static_cast<int>(cg.iterations());
  }
  const double bn = sys.rhs.norm();
  st.residual = bn > 0 ? (sys.matrix * x - sys.rhs).norm() / bn : (sys.matrix * x).norm();
  if (!(st.residual <= std::max(1e-8, 10 * opt.cg_tolerance)))
    throw SolverError("linear solve did not converge (" + st.method + ", relative residual " +
                      std::to_string(st.residual) + ")");
  return x;
}

inline ComponentField solve_component(const MappedMesh& mesh, const DielectricModel& model,
                                      const PotentialOptions& opt) {
  ComponentField cf{mesh, {}, {}, {}};
  const int nc = mesh.cells_x(), ne = mesh.cells_eta();
  cf.chi.assign(static_cast<std::size_t>(nc + 1) * (ne + 1), 0.0);
  const LinearSystem sys = assemble(mesh, model, opt.source);
  const Eigen::VectorXd x = solve_system(sys, opt, cf.stats);
  for (int k = 1; k < nc; ++k)
    for (int j = 0; j < ne; ++j) cf.chi[static_cast<std::size_t>(k) * (ne + 1) + j] = x(sys.numbering(k, j));
  cf.functional = discrete_functional(mesh, model, cf.chi);
  return cf;
}

// Solved potential over all non-contact components with nodal traces on the global grid.
// Traces are NaN on contact nodes.
struct PotentialField {
  CoincidenceSet coincidence;
  std::vector<ComponentField> components;
  std::vector<int> owner;  // component index per global node, -1 on contact
  std::vector<double> top_dz, bot_val, bot_dx;
  int n_eta = 0;

  bool has_field(int i) const { return owner[i] >= 0; }

  // psi = chi + h_v at local node (k, j) of component c.
  double psi(int c, int k, int j, const DielectricModel& model) const {
    const MappedMesh& m = components[c].mesh;
    return components[c].at(k, j) + model.h(m.x(k), m.z(k, j), -m.H() + m.gap(k)).value;
  }

  double chi_sup() const {
    double s = 0;
    for (const auto& c : components)
      for (double v : c.chi) s = std::max(s, std::abs(v));
    return s;
  }

  FunctionalParts functional() const {
    FunctionalParts f;
    for (const auto& c : components) {
      f.field += c.functional.field;
      f.robin += c.functional.robin;
    }
    return f;
  }
};

inline PotentialField solve_potential(const DeflectionProfile& p, const DielectricModel& model,
                                      const PotentialOptions& opt = {}) {
  require(std::abs(p.H() - model.H()) <= 1e-12 * model.H() && std::abs(p.L() - model.L()) <= 1e-12 * model.L(),
          "profile and model disagree on L or H");
  PotentialField f;
  f.n_eta = opt.n_eta;
  f.coincidence = detect_coincidence(p, opt.threshold_for(p.H()));
  const int n = p.cells();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  f.owner.assign(n + 1, -1);
  f.top_dz.assign(n + 1, nan);
  f.bot_val.assign(n + 1, nan);
  f.bot_dx.assign(n + 1, nan);
  for (const Component& c : f.coincidence.components) {
    f.components.push_back(solve_component(MappedMesh(p, c, opt.n_eta), model, opt));
    const ComponentField& cf = f.components.back();
    const MappedMesh& m = cf.mesh;
    const int ne = m.cells_eta(), nc = m.cells_x();
    const double de = m.deta(), dx = m.dx();
    for (int k = 0; k <= nc; ++k) {
      if (!m.owns(k)) continue;
      const int gi = m.lo() + k;
      f.owner[gi] = static_cast<int>(f.components.size()) - 1;
      f.top_dz[gi] = (3.0 * cf.at(k, ne) - 4.0 * cf.at(k, ne - 1) + cf.at(k, ne - 2)) / (2.0 * de * m.gap(k));
      f.bot_val[gi] = cf.at(k, 0);
      if (k == 0)
        f.bot_dx[gi] = (-3.0 * cf.at(0, 0) + 4.0 * cf.at(1, 0) - cf.at(2, 0)) / (2.0 * dx);
      else if (k == nc)
        f.bot_dx[gi] = (3.0 * cf.at(nc, 0) - 4.0 * cf.at(nc - 1, 0) + cf.at(nc - 2, 0)) / (2.0 * dx);
      else
        f.bot_dx[gi] = (cf.at(k + 1, 0) - cf.at(k - 1, 0)) / (2.0 * dx);
    }
  }
  return f;
}

struct MaxPrincipleReport {
  double min_psi = 0, max_psi = 0;
  double lower_bound = 0, upper_bound = 0;
  double tolerance = 0;
  bool violated = false;
  double worst_x = 0, worst_z = 0;  // location of the largest bound excess
};

inline MaxPrincipleReport max_principle_check(const PotentialField& f, const DielectricModel& model,
                                              const DeflectionProfile& p) {
  MaxPrincipleReport r;
  const double inf = std::numeric_limits<double>::infinity();
  r.min_psi = inf;
  r.max_psi = -inf;
  double lo = inf, hi = -inf;
  auto bound = [&](double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  };
  for (int i = 0; i <= p.cells(); ++i) bound(model.frak_h(p.x(i), p[i]).value);
  for (const ComponentField& cf : f.components) {
    const MappedMesh& m = cf.mesh;
    const int nc = m.cells_x(), ne = m.cells_eta();
    for (int k = 0; k <= nc; ++k) {
      const double v = -m.H() + m.gap(k);
      bound(model.h(m.x(k), v, v).value);
      bound(model.h(m.x(k), -m.H(), v).value);
      if (k == 0 || k == nc)
        for (int j = 0; j <= ne; ++j) bound(model.h(m.x(k), m.z(k, j), v).value);
    }
  }
  r.lower_bound = lo;
  r.upper_bound = hi;
  r.tolerance = 1e-6 * model.V();
  double worst = 0;
  for (std::size_t c = 0; c < f.components.size(); ++c) {
    const MappedMesh& m = f.components[c].mesh;
    for (int k = 0; k <= m.cells_x(); ++k) {
      for (int j = 0; j <= m.cells_eta(); ++j) {
        const double psi = f.psi(static_cast<int>(c), k, j, model);
        r.min_psi = std::min(r.min_psi, psi);
        r.max_psi = std::max(r.max_psi, psi);
        const double excess = std::max(lo - psi, psi - hi);
        if (excess > worst) {
          worst = excess;
          r.worst_x = m.x(k);
          r.worst_z = m.z(k, j);
        }
      }
    }
  }
  r.violated = worst > r.tolerance;
  return r;
}

}  // namespace mems
