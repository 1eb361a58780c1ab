#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mems/error.hpp"
#include "mems/oracle/identities.hpp"
#include "mems/oracle/jet.hpp"
#include "mems/quadrature.hpp"

namespace mems::oracle {

// Functional inequalities on O = {a < x < b, -H < z < v(x)}:
//   0: ||P||_2^2 <= 2M ||grad P||_1 ||P_z||_1
//   1: ||P||_r^r <= (2r sqrt M)^(r-2) ||P||_2^2 ||grad P||_2^((r-2)/2) ||P_z||_2^((r-2)/2)
//   2: ||P(., v)||_r^r <= (4r sqrt M)^r ||P||_2 ||grad P||_2^((r-2)/2) ||P_z||_2^(r/2)
//   3: ||t||_2 <= 2 M_v ||t_z||_2
//   4: ||t(., -H)||_2^2 <= 2 ||t||_2 ||t_z||_2
// P vanishes at z = -H and x = a; t vanishes on the graph and on both sides.
inline constexpr std::array<const char*, 5> kInequalityNames = {"poincare_l1", "sobolev_lr", "graph_trace_lr",
                                                                "poincare_graph", "bottom_trace"};

struct InequalityCheck {
  int r = 2;
  std::array<double, 5> lhs{}, rhs{};
  double margin(int i) const { return rhs[i] - lhs[i]; }
  double relative_margin(int i) const {
    const double s = std::max(std::abs(lhs[i]), std::abs(rhs[i]));
    return s > 0 ? (rhs[i] - lhs[i]) / s : 0.0;
  }
  // Negative beyond quadrature round-off.
  bool violated(int i) const { return relative_margin(i) < -1e-9; }
};

struct DomainSample {
  Curve v;
  double H = 1, a = -1, b = 1;
};

// Sampled norms of P and t on a composite 3-point Gauss grid of n x n cells in (x, eta).
class NormTable {
 public:
  NormTable(const DomainSample& d, const Field2& P, const Field2& t, int n) {
    require(d.b > d.a && n >= 1, "inequality domain needs a < b and n >= 1");
    const double hx = (d.b - d.a) / n, he = 1.0 / n;
    M_ = 1.0;
    Mv_ = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int qa = 0; qa < 3; ++qa) {
        const double x = d.a + (i + quad::kGauss3Nodes[qa]) * hx;
        const double wx = quad::kGauss3Weights[qa] * hx;
        const Jet vx = d.v(Jet::var_x(x));
        const double G = d.H + vx.v;
        require(G > 0.0, "inequality domain needs H + v > 0");
        M_ = std::max({M_, G, std::abs(vx.dx)});
        Mv_ = std::max(Mv_, G);
        const Jet top = P(Jet::var_x(x), Jet::var_y(vx.v));
        trace_.push_back({wx, top.v});
        const Jet bot = t(Jet::var_x(x), Jet::var_y(-d.H));
        bottom_ += wx * bot.v * bot.v;
        for (int j = 0; j < n; ++j) {
          for (int qb = 0; qb < 3; ++qb) {
            const double z = -d.H + (j + quad::kGauss3Nodes[qb]) * he * G;
            const double w = wx * quad::kGauss3Weights[qb] * he * G;
            const Jet p = P(Jet::var_x(x), Jet::var_y(z));
            const Jet s = t(Jet::var_x(x), Jet::var_y(z));
            pts_.push_back({w, p.v, p.dx, p.dy});
            t2_ += w * s.v * s.v;
            tz2_ += w * s.dy * s.dy;
          }
        }
      }
    }
    // Both bounds also hold with any larger constant; the sampled values are lower estimates of the
    // true suprema, so the end points are included.
    for (double x : {d.a, d.b}) {
      const Jet vx = d.v(Jet::var_x(x));
      M_ = std::max({M_, d.H + vx.v, std::abs(vx.dx)});
      Mv_ = std::max(Mv_, d.H + vx.v);
    }
  }

  InequalityCheck check(int r) const {
    require(r >= 2, "exponent r must be at least 2");
    double p2 = 0, g1 = 0, z1 = 0, g2 = 0, z2 = 0, pr = 0, tr = 0;
    for (const Pt& q : pts_) {
      const double g = std::sqrt(q.px * q.px + q.pz * q.pz);
      p2 += q.w * q.p * q.p;
      g1 += q.w * g;
      z1 += q.w * std::abs(q.pz);
      g2 += q.w * g * g;
      z2 += q.w * q.pz * q.pz;
      pr += q.w * std::pow(std::abs(q.p), r);
    }
    for (const auto& [w, p] : trace_) tr += w * std::pow(std::abs(p), r);
    const double gn = std::sqrt(g2), zn = std::sqrt(z2), rd = r;
    InequalityCheck c;
    c.r = r;
    c.lhs = {p2, pr, tr, std::sqrt(t2_), bottom_};
    c.rhs = {2.0 * M_ * g1 * z1,
             std::pow(2.0 * rd * std::sqrt(M_), rd - 2) * p2 * std::pow(gn, (rd - 2) / 2) * std::pow(zn, (rd - 2) / 2),
             std::pow(4.0 * rd * std::sqrt(M_), rd) * std::sqrt(p2) * std::pow(gn, (rd - 2) / 2) * std::pow(zn, rd / 2),
             2.0 * Mv_ * std::sqrt(tz2_), 2.0 * std::sqrt(t2_) * std::sqrt(tz2_)};
    return c;
  }

  double M() const { return M_; }
  double Mv() const { return Mv_; }

 private:
  struct Pt {
    double w, p, px, pz;
  };
  std::vector<Pt> pts_;
  std::vector<std::pair<double, double>> trace_;
  double t2_ = 0, tz2_ = 0, bottom_ = 0;
  double M_ = 1, Mv_ = 0;
};

inline std::vector<InequalityCheck> inequality_battery(const DomainSample& d, const Field2& P, const Field2& t,
                                                       const std::vector<int>& rs, int n = 48) {
  const NormTable table(d, P, t, n);
  std::vector<InequalityCheck> out;
  for (int r : rs) out.push_back(table.check(r));
  return out;
}

// Random trigonometric polynomial in (x, z) with n_modes^2 terms.
inline Field2 random_trig(std::mt19937_64& rng, double a, double b, double H, int n_modes = 3) {
  std::normal_distribution<double> N01;
  std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
  struct Term {
    double c, kx, kz, phase;
  };
  std::vector<Term> terms;
  terms.push_back({N01(rng), 0.0, 0.0, 0.5 * std::numbers::pi});
  for (int m = 0; m < n_modes; ++m)
    for (int k = 0; k < n_modes; ++k)
      terms.push_back({N01(rng) / (1.0 + m + k), (m + 1) * std::numbers::pi / (b - a),
                       (k + 1) * std::numbers::pi / (2.0 * H), ph(rng)});
  return [terms](const Jet& x, const Jet& z) {
    Jet s;
    for (const Term& t : terms) s = s + t.c * sin(t.kx * x + t.kz * z + t.phase);
    return s;
  };
}

struct BatteryViolation {
  int sample = 0, r = 0;
  std::string inequality;
  double lhs = 0, rhs = 0;
};

struct BatteryReport {
  int samples = 0, checks = 0;
  std::vector<BatteryViolation> violations;
  std::array<double, 5> worst_relative_margin{1, 1, 1, 1, 1};
  std::array<double, 5> max_ratio{};  // largest observed lhs / rhs
};

// Random graphs v, subintervals (a, b) of (-L, L) and test functions built to satisfy the
// vanishing conditions of each inequality.
inline BatteryReport random_inequality_battery(int samples, const std::vector<int>& rs, std::uint64_t seed,
                                               double H = 1.0, double L = 1.0, int n = 48) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  BatteryReport rep;
  rep.samples = samples;
  for (int s = 0; s < samples; ++s) {
    double a = -L + 0.5 * L * U(rng), b = L - 0.5 * L * U(rng);
    const double amp = H * (-0.6 + 1.4 * U(rng)), wig = 0.2 * H * (U(rng) - 0.5);
    const double freq = 1.0 + 3.0 * U(rng);
    const double Lc = L;
    const Curve v = [=](const Jet& x) {
      const Jet q = 1.0 - (x * x) / (Lc * Lc);
      return amp * q * q + wig * sin(freq * std::numbers::pi * x);
    };
    const Field2 T1 = random_trig(rng, a, b, H), T2 = random_trig(rng, a, b, H);
    const Field2 P = [=](const Jet& x, const Jet& z) { return (x - a) * (z + H) * T1(x, z); };
    const Field2 t = [=](const Jet& x, const Jet& z) { return (x - a) * (b - x) * (v(x) - z) * T2(x, z); };
    const DomainSample d{v, H, a, b};
    for (const InequalityCheck& c : inequality_battery(d, P, t, rs, n)) {
      for (int i = 0; i < 5; ++i) {
        ++rep.checks;
        rep.worst_relative_margin[i] = std::min(rep.worst_relative_margin[i], c.relative_margin(i));
        if (c.rhs[i] > 0) rep.max_ratio[i] = std::max(rep.max_ratio[i], c.lhs[i] / c.rhs[i]);
        if (c.violated(i)) rep.violations.push_back({s, c.r, kInequalityNames[i], c.lhs[i], c.rhs[i]});
      }
    }
  }
  return rep;
}

}  // namespace mems::oracle
