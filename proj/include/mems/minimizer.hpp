#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "mems/dielectric_model.hpp"
#include "mems/energy.hpp"
#include "mems/force.hpp"
#include "mems/geometry.hpp"
#include "mems/potential_solver.hpp"

namespace mems {

struct MinimizeOptions {
  std::optional<double> k;  // empty: k = kappa0
  int max_iters = 200;
  double tol_stat = 1e-10;
  double tol_act = 1e-10;
  double tol_energy = 0.0;  // stop when the relative E_k decrease falls below this (0: off)
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 30;
  int force_refresh = 1;  // potential and force recomputed every this many iterations
  int audit_every = 0;    // directional-derivative audit cadence (0: off)
  PotentialOptions potential;
};

struct VIResidual {
  std::vector<double> r;         // nodal residual; zero on the boundary rows
  std::vector<char> active;      // interior nodes with u = -H
  double stationarity = 0;       // max |r| over inactive interior nodes
  double active_min = 0;         // min r over active nodes (+inf when none)
  int active_count = 0;
  double feasibility = 0;        // max(-H - u)_+, zero by construction
  // Size of the rounding error in r: the 1/h^4 stencil amplifies eps |u| well above 1e-10
  // on fine grids, so stationarity is judged against max(tol_stat, roundoff).
  double roundoff = 0;

  bool satisfied(double tol_stat, double tol_act) const {
    return stationarity <= std::max(tol_stat, roundoff) && active_min >= -std::max(tol_act, roundoff) &&
           feasibility == 0.0;
  }
};

// beta D4 u - (tau + alpha ||u'||^2) D2 u + A (u - k)_+ + g at interior nodes.
inline VIResidual vi_residual(const DeflectionProfile& p, const ModelConstants& c, double k,
                              const std::vector<double>& g) {
  const int n = p.cells();
  const std::vector<double> d4 = beam::fourth_difference(p);
  const std::vector<double> d2 = beam::second_difference(p);
  const double tau_eff = c.tau + c.alpha * beam::slope_norm_sq(p);
  VIResidual v;
  v.r.assign(n + 1, 0.0);
  v.active.assign(n + 1, 0);
  v.active_min = std::numeric_limits<double>::infinity();
  for (int i = 1; i < n; ++i) {
    v.r[i] = c.beta * d4[i] - tau_eff * d2[i] + c.A * std::max(p[i] - k, 0.0) + g[i];
    if (p[i] <= -p.H()) {
      v.active[i] = 1;
      ++v.active_count;
      v.active_min = std::min(v.active_min, v.r[i]);
    } else {
      v.stationarity = std::max(v.stationarity, std::abs(v.r[i]));
    }
  }
  double umax = 0, gmax = 0;
  for (int i = 0; i <= n; ++i) {
    v.feasibility = std::max(v.feasibility, -p.H() - p[i]);
    umax = std::max(umax, std::abs(p[i]));
    gmax = std::max(gmax, std::abs(g[i]));
  }
  const double h2 = p.dx() * p.dx();
  v.roundoff = 4.0 * std::numeric_limits<double>::epsilon() *
               ((16.0 * c.beta / (h2 * h2) + 4.0 * tau_eff / h2 + c.A) * umax + gmax);
  return v;
}

inline VIResidual vi_residual(const DeflectionProfile& p, const DielectricModel& model,
                              const ModelConstants& c, double k, const PotentialOptions& opt = {}) {
  const PotentialField f = solve_potential(p, model, opt);
  return vi_residual(p, c, k, discrete_energy_gradient(p, model, f, compute_force(p, model, f)));
}

struct SupBound {
  bool ok = true;
  double margin = 0;
};

inline SupBound sup_bound_check(const DeflectionProfile& p, const ModelConstants& c) {
  const double mx = *std::max_element(p.values().begin(), p.values().end());
  return {mx <= c.kappa0, c.kappa0 - mx};
}

struct HistoryRow {
  int iter = 0;
  double E_m = 0, E_e = 0, E_k = 0, stationarity = 0;
  int active_count = 0;
};

struct AuditRow {
  int iter = 0;
  double fd = 0, pairing = 0;
};

struct MinimizeResult {
  DeflectionProfile profile;
  EnergyReport energy;
  VIResidual residual;        // with the discrete energy gradient; the optimality measure
  VIResidual residual_trace;  // same with the trace-formula force g (differs by discretization error)
  ForceProfile force;
  PotentialField field;
  std::vector<HistoryRow> history;
  std::vector<AuditRow> audits;
  double k = 0;
  bool converged = false;
  std::string status;
  int iterations = 0;
};

namespace detail {

struct State {
  DeflectionProfile u;
  PotentialField field;
  ForceProfile force;
  std::vector<double> grad;  // discrete gradient of E_e, contact nodes from the force
  EnergyReport energy;
};

inline State evaluate(const DeflectionProfile& u, const DielectricModel& model, const ModelConstants& c,
                      double k, const PotentialOptions& opt) {
  PotentialField f = solve_potential(u, model, opt);
  ForceProfile g = compute_force(u, model, f);
  std::vector<double> grad = discrete_energy_gradient(u, model, f, g);
  EnergyReport e = make_report(u, electrostatic_energy(f, model, u), c, k);
  return {u, std::move(f), std::move(g), std::move(grad), e};
}

// beta D4 - tau_eff D2 + A diag(u > k) restricted to the free interior nodes.
inline Eigen::SparseMatrix<double> beam_stiffness(const DeflectionProfile& p, const ModelConstants& c,
                                                  double k, const std::vector<int>& map, int nfree) {
  const int n = p.cells();
  const double h = p.dx(), h2 = h * h, h4 = h2 * h2;
  const double tau_eff = c.tau + c.alpha * beam::slope_norm_sq(p);
  const double ghost = p.bc() == BcMode::clamped ? 1.0 : -1.0;
  std::vector<Eigen::Triplet<double>> t;
  auto add = [&](int i, int j, double v) {
    if (j < 1 || j > n - 1 || map[i] < 0 || map[j] < 0) return;
    t.emplace_back(map[i], map[j], v);
  };
  for (int i = 1; i < n; ++i) {
    double diag = 6.0 * c.beta / h4 + 2.0 * tau_eff / h2 + (p[i] > k ? c.A : 0.0);
    if (i == 1 || i == n - 1) diag += ghost * c.beta / h4;
    add(i, i, diag);
    add(i, i - 1, -4.0 * c.beta / h4 - tau_eff / h2);
    add(i, i + 1, -4.0 * c.beta / h4 - tau_eff / h2);
    add(i, i - 2, c.beta / h4);
    add(i, i + 2, c.beta / h4);
  }
  Eigen::SparseMatrix<double> K(nfree, nfree);
  K.setFromTriplets(t.begin(), t.end());
  return K;
}

}  // namespace detail

inline MinimizeResult minimize(const DeflectionProfile& initial, const DielectricModel& model,
                               const ModelConstants& c, const MinimizeOptions& opt = {}) {
  const double k = opt.k.value_or(c.kappa0);
  require(k >= c.H, "penalty level k must satisfy k >= H");
  require(opt.max_iters >= 0 && opt.force_refresh >= 1, "invalid iteration controls");
  const int n = initial.cells();
  const double H = initial.H(), h = initial.dx();

  detail::State cur = detail::evaluate(initial, model, c, k, opt.potential);
  VIResidual res = vi_residual(cur.u, c, k, cur.grad);
  std::vector<HistoryRow> hist;
  std::vector<AuditRow> audits;
  auto record = [&](int it) {
    hist.push_back({it, cur.energy.E_m, cur.energy.E_e, cur.energy.E_k, res.stationarity, res.active_count});
  };
  record(0);

  // Frozen-force surrogate: E_k with E_e replaced by its linearization at the last solve.
  std::optional<detail::State> anchor;
  auto surrogate = [&](const DeflectionProfile& u, const detail::State& a) {
    EnergyReport e = make_report(u, a.energy.electrostatic, c, k);
    double lin = 0;
    const std::vector<double> w = quad::trapezoid_weights(n, h);
    for (int i = 0; i <= n; ++i) lin += w[i] * a.grad[i] * (u[i] - a.u[i]);
    e.E_e += lin;
    e.E_total += lin;
    e.E_k += lin;
    return e;
  };

  std::string status = "max_iters";
  bool converged = false;
  int it = 0;
  bool fresh = true;  // res computed from a solved potential, not the frozen force
  for (; it < opt.max_iters; ++it) {
    if (fresh && res.satisfied(opt.tol_stat, opt.tol_act)) {
      converged = true;
      status = "converged";
      break;
    }
    // Nodes held at the obstacle: at -H and pushed further down by the residual.
    std::vector<int> map(n + 1, -1);
    int nfree = 0;
    for (int i = 1; i < n; ++i)
      if (!(cur.u[i] <= -H && res.r[i] > 0.0)) map[i] = nfree++;
    if (nfree == 0) {
      status = "all nodes held at the obstacle";
      break;
    }
    Eigen::VectorXd rhs(nfree);
    for (int i = 1; i < n; ++i)
      if (map[i] >= 0) rhs(map[i]) = -res.r[i];
    const Eigen::SparseMatrix<double> K = detail::beam_stiffness(cur.u, c, k, map, nfree);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
    if (ldlt.info() != Eigen::Success) throw SolverError("beam stiffness factorization failed");
    const Eigen::VectorXd d = ldlt.solve(rhs);

    const bool frozen = opt.force_refresh > 1 && (it % opt.force_refresh) != 0;
    if (!frozen) anchor.reset();
    if (frozen && !anchor) anchor = cur;

    auto trial_profile = [&](double t, bool steepest) {
      std::vector<double> v = cur.u.values();
      for (int i = 1; i < n; ++i) {
        if (map[i] < 0) continue;
        const double step = steepest ? -res.r[i] : d(map[i]);
        v[i] = std::max(v[i] + t * step, -H);
      }
      return cur.u.with_values(std::move(v));
    };

    const double e0 = frozen ? surrogate(cur.u, *anchor).E_k : cur.energy.E_k;
    const double slack = 1e-12 * std::max(1.0, std::abs(e0));
    bool accepted = false;
    for (int pass = 0; pass < 2 && !accepted; ++pass) {
      const bool steepest = pass == 1;
      double t = steepest ? h * h * h * h / (16.0 * c.beta + h * h * h * h * c.A) : 1.0;
      for (int b = 0; b <= opt.max_backtracks; ++b, t *= opt.backtrack) {
        DeflectionProfile trial = trial_profile(t, steepest);
        double pred = 0;
        for (int i = 1; i < n; ++i) pred += h * res.r[i] * (trial[i] - cur.u[i]);
        if (frozen) {
          const EnergyReport e = surrogate(trial, *anchor);
          if (e.E_k <= e0 + opt.armijo * pred + slack) {
            cur.u = std::move(trial);
            cur.energy = e;
            accepted = true;
            break;
          }
        } else {
          detail::State s = detail::evaluate(trial, model, c, k, opt.potential);
          if (s.energy.E_k <= e0 + opt.armijo * pred + slack) {
            cur = std::move(s);
            accepted = true;
            break;
          }
        }
      }
    }
    if (!accepted) {
      status = "line search failed";
      break;
    }
    if (frozen) {
      // Residual of the frozen problem; the true state is refreshed at the next full step.
      res = vi_residual(cur.u, c, k, anchor->grad);
      fresh = false;
      if (((it + 1) % opt.force_refresh) == 0 || it + 1 == opt.max_iters) {
        detail::State s = detail::evaluate(cur.u, model, c, k, opt.potential);
        if (s.energy.E_k > anchor->energy.E_k + slack) {
          cur = *anchor;
        } else {
          cur = std::move(s);
        }
        anchor.reset();
        res = vi_residual(cur.u, c, k, cur.grad);
        fresh = true;
      }
    } else {
      res = vi_residual(cur.u, c, k, cur.grad);
      fresh = true;
    }
    const double prev = hist.back().E_k;
    record(it + 1);
    if (opt.audit_every > 0 && (it + 1) % opt.audit_every == 0) {
      // Unit-sup descent direction, probed with a small forward step when it stays feasible.
      std::vector<double> theta(n + 1, 0.0);
      double rmax = 0;
      for (int i = 1; i < n; ++i) rmax = std::max(rmax, std::abs(res.r[i]));
      bool feasible = rmax > 0;
      for (int i = 1; i < n && feasible; ++i) {
        theta[i] = -res.r[i] / rmax;
        feasible = cur.u[i] + 1e-6 * theta[i] >= -H;
      }
      if (feasible) {
        const auto rows = directional_derivative_check(cur.u, theta, model, {1e-6}, opt.potential);
        audits.push_back({it + 1, rows[0].fd, rows[0].pairing});
      }
    }
    if (opt.tol_energy > 0 && !frozen && prev - cur.energy.E_k >= 0 &&
        prev - cur.energy.E_k <= opt.tol_energy * std::max(1.0, std::abs(prev)) &&
        res.satisfied(std::max(opt.tol_stat, 1e-8), opt.tol_act)) {
      converged = true;
      status = "converged (energy)";
      ++it;
      break;
    }
  }
  if (anchor || !fresh) {
    cur = detail::evaluate(cur.u, model, c, k, opt.potential);
    res = vi_residual(cur.u, c, k, cur.grad);
  }
  if (!converged && res.satisfied(opt.tol_stat, opt.tol_act)) {
    converged = true;
    status = "converged";
  }
  VIResidual trace = vi_residual(cur.u, c, k, cur.force.g);
  return {cur.u, cur.energy, res, std::move(trace), cur.force, std::move(cur.field), std::move(hist),
          std::move(audits), k, converged, status, it};
}

}  // namespace mems
