#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <json.hpp>

#include "mems/oracle/beam.hpp"
#include "mems/oracle/identities.hpp"
#include "mems/oracle/inequalities.hpp"

namespace mems::app {

using json = nlohmann::ordered_json;

struct OracleOptions {
  std::uint64_t seed = 20240611;
  int beam_draws = 100;
  int inequality_samples = 50;
  int identity_n = 256;
};

inline json beam_report(const OracleOptions& o) {
  using namespace oracle;
  json j;
  const BeamOracleSolution s = solve_beam_oracle(BeamCase::clamped_both, -1.0, 1.0, 24.0, 1.0, 0.0, 1.0);
  double smin = 1e300;
  for (int i = 1; i < 400; ++i) smin = std::min(smin, s(-1.0 + 2.0 * i / 400));
  const double bound = beam_case_bound(BeamCase::clamped_both, 1.0, 24.0, 1.0, 0.0, 1.0);
  j["reference"] = {{"max_S", s(0.0)}, {"min_interior_S", smin}, {"sup_norm", s.sup_norm()}, {"bound", bound},
                    {"pass", std::abs(s(0.0) - 1.0) <= 1e-10 && smin > 0 && s.sup_norm() <= bound}};

  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst_ode = 0, worst_bc = 0, worst_ratio = 0;
  int positivity_failures = 0;
  for (int d = 0; d < o.beam_draws; ++d) {
    const BeamCase c = static_cast<BeamCase>(1 + static_cast<int>(U(rng) * 4) % 4);
    const double L = 1.0, H = 0.2 + 1.8 * U(rng);
    double a = -L, b = L;
    if (c == BeamCase::obstacle_both || c == BeamCase::clamped_right) a = -L + 0.9 * L * U(rng);
    if (c == BeamCase::obstacle_both || c == BeamCase::clamped_left) b = L - 0.9 * L * U(rng);
    const double G0 = 0.1 + 50.0 * U(rng), beta = 0.2 + 4.8 * U(rng);
    const double tau = U(rng) < 0.3 ? 0.0 : 20.0 * U(rng);
    const BeamOracleSolution sol = solve_beam_oracle(c, a, b, G0, beta, tau, H);
    const auto r = sol.residuals();
    worst_ode = std::max(worst_ode, r[0]);
    worst_bc = std::max(worst_bc, r[1]);
    worst_ratio = std::max(worst_ratio, sol.sup_norm() / beam_case_bound(c, L, G0, beta, tau, H));
    // Homogeneous-data configurations: the shifted solution is positive inside.
    if (c == BeamCase::obstacle_both || c == BeamCase::clamped_both) {
      const double shift = c == BeamCase::obstacle_both ? H : 0.0;
      for (int i = 1; i < 100; ++i)
        if (!(sol(a + (b - a) * i / 100.0) + shift > 0)) {
          ++positivity_failures;
          break;
        }
    }
  }
  j["random"] = {{"draws", o.beam_draws},
                 {"worst_ode_residual", worst_ode},
                 {"worst_bc_residual", worst_bc},
                 {"worst_sup_to_bound", worst_ratio},
                 {"positivity_failures", positivity_failures},
                 {"pass", worst_ode <= 1e-10 && worst_bc <= 1e-10 && worst_ratio <= 1.0 && positivity_failures == 0}};
  j["pass"] = j["reference"]["pass"].get<bool>() && j["random"]["pass"].get<bool>();
  return j;
}

inline json identity_report(const OracleOptions& o) {
  using namespace oracle;
  const int N = o.identity_n, Nh = N / 2, Nq = N / 4;
  json j;
  auto ratio_ok = [](double r) { return std::abs(r - 16.0) <= 0.2 * 16.0; };

  const Field2 rect1 = robin_family(-1.0, 1.0, 1, constant_curve(1.0));
  const double r64 = identity_check_rect(constant_curve(1.0), rect1, -1, 1, Nq).residual;
  const double r128 = identity_check_rect(constant_curve(1.0), rect1, -1, 1, Nh).residual;
  const double r256 = identity_check_rect(constant_curve(1.0), rect1, -1, 1, N).residual;
  const double rmu2 = identity_check_rect(constant_curve(2.0), robin_family(-1.0, 1.0, 1, constant_curve(2.0)), -1, 1, N)
                          .residual;
  j["rectangle"] = {{"residuals", {r64, r128, r256}},
                    {"ratio", r64 / r128},
                    {"mu2_residual", rmu2},
                    {"pass", r256 <= 1e-8 && rmu2 <= 1e-8 && ratio_ok(r64 / r128)}};

  const double H = 1.0, vc = 0.3;
  const Curve vconst = constant_curve(vc);
  const Field2 zc = mapped_function(robin_family(-1.0, 1.0, 1, constant_curve(H + vc)), vconst, H);
  const double m64 = identity_check_mapped(vconst, constant_curve(1.0), zc, H, -1, 1, Nq).residual;
  const double m128 = identity_check_mapped(vconst, constant_curve(1.0), zc, H, -1, 1, Nh).residual;
  const double m256 = identity_check_mapped(vconst, constant_curve(1.0), zc, H, -1, 1, N).residual;
  j["mapped_constant"] = {{"residuals", {m64, m128, m256}},
                          {"ratio", m64 / m128},
                          {"pass", m256 <= 1e-8 && ratio_ok(m64 / m128)}};

  const Curve vb = [H](const Jet& x) {
    const Jet q = 1.0 - x * x;
    return 0.5 * H * q * q;
  };
  const Curve mu = [vb, H](const Jet& x) { return H + vb(x); };
  const Field2 zb = mapped_function(robin_family(-1.0, 1.0, 1, mu), vb, H);
  const double b64 = identity_check_mapped(vb, constant_curve(1.0), zb, H, -1, 1, Nq).residual;
  const double b128 = identity_check_mapped(vb, constant_curve(1.0), zb, H, -1, 1, Nh).residual;
  const double order = std::log2(b64 / b128);
  j["mapped_bump"] = {{"residuals", {b64, b128}}, {"observed_order", order}, {"pass", order >= 2.0}};
  j["pass"] = j["rectangle"]["pass"].get<bool>() && j["mapped_constant"]["pass"].get<bool>() &&
              j["mapped_bump"]["pass"].get<bool>();
  return j;
}

inline json inequality_report(const OracleOptions& o) {
  using namespace oracle;
  const BatteryReport rep = random_inequality_battery(o.inequality_samples, {2, 4, 8}, o.seed + 1);
  json j;
  j["samples"] = rep.samples;
  j["checks"] = rep.checks;
  json worst, ratio;
  for (int i = 0; i < 5; ++i) {
    worst[kInequalityNames[i]] = rep.worst_relative_margin[i];
    ratio[kInequalityNames[i]] = rep.max_ratio[i];
  }
  j["worst_relative_margin"] = worst;
  j["max_lhs_over_rhs"] = ratio;
  json v = json::array();
  for (const auto& x : rep.violations)
    v.push_back({{"sample", x.sample}, {"r", x.r}, {"inequality", x.inequality}, {"lhs", x.lhs}, {"rhs", x.rhs}});
  j["violations"] = v;
  j["pass"] = rep.violations.empty();
  return j;
}

inline json oracle_battery(const OracleOptions& o = {}) {
  json j;
  j["beam"] = beam_report(o);
  j["identities"] = identity_report(o);
  j["inequalities"] = inequality_report(o);
  j["pass"] = j["beam"]["pass"].get<bool>() && j["identities"]["pass"].get<bool>() &&
              j["inequalities"]["pass"].get<bool>();
  return j;
}

}  // namespace mems::app
