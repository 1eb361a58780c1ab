#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mems/energy.hpp"
#include "mems/force.hpp"

using namespace mems;
using mems::test::bump;
using mems::test::unit_model;

namespace {

ModelConstants unit_constants(const DielectricModel& m, double beta = 1.0, double tau = 0.0, double alpha = 0.0) {
  return compute_constants(m, beta, tau, alpha, 1.0, 1.0, BcMode::clamped);
}

std::vector<double> quartic_direction(const DeflectionProfile& p) {
  std::vector<double> th(p.nodes());
  for (int i = 0; i < p.nodes(); ++i) {
    const double q = 1.0 - p.x(i) * p.x(i);
    th[i] = q * q;
  }
  return th;
}

}  // namespace

TEST(MechanicalEnergy, ZeroProfile) {
  const MechanicalEnergy e = mechanical_energy(DeflectionProfile::flat(1.0, 1.0, 64), 1.0, 1.0, 1.0);
  EXPECT_EQ(e.total(), 0.0);
}

TEST(MechanicalEnergy, BendingOfQuarticConvergesSecondOrder) {
  // 1/2 int ((1-x^2)^2)''^2 = 1/2 int (12x^2 - 4)^2 = 12.8.
  const double e1 = mechanical_energy(bump(1.0, 64), 1.0, 0.0, 0.0).total();
  const double e2 = mechanical_energy(bump(1.0, 128), 1.0, 0.0, 0.0).total();
  const double e3 = mechanical_energy(bump(1.0, 256), 1.0, 0.0, 0.0).total();
  EXPECT_NEAR(e3, 12.8, 2e-3);
  EXPECT_NEAR(std::log2((e1 - 12.8) / (e2 - 12.8)), 2.0, 0.2);
  EXPECT_NEAR(std::log2((e2 - 12.8) / (e3 - 12.8)), 2.0, 0.2);
}

TEST(MechanicalEnergy, SlopeNormOfQuartic) {
  // int (-4x + 4x^3)^2 = 256/105.
  const double exact = 256.0 / 105.0;
  const double s1 = beam::slope_norm_sq(bump(1.0, 128)), s2 = beam::slope_norm_sq(bump(1.0, 256));
  EXPECT_NEAR(s2, exact, 1e-3);
  EXPECT_NEAR(std::log2((s1 - exact) / (s2 - exact)), 2.0, 0.2);
  const MechanicalEnergy e = mechanical_energy(bump(1.0, 256), 0.0, 2.0, 0.0);
  EXPECT_NEAR(e.stretching, s2, 1e-15);
}

TEST(MechanicalEnergy, GradientMatchesStencils) {
  // E_m(u + t e_i) differences reproduce h (beta D4 u - tau_eff D2 u) at interior nodes.
  const double beta = 1.3, tau = 0.4, alpha = 0.7;
  for (BcMode bc : {BcMode::clamped, BcMode::pinned}) {
    const DeflectionProfile p = DeflectionProfile::from_function(
        1.0, 1.0, 32, [](double x) { return 0.3 * std::sin(M_PI * (x + 1)) * (1 - x * x); }, bc);
    const std::vector<double> d4 = beam::fourth_difference(p), d2 = beam::second_difference(p);
    const double tau_eff = tau + alpha * beam::slope_norm_sq(p);
    for (int i : {1, 2, 7, 16, 30, 31}) {
      std::vector<double> a = p.values(), b = p.values();
      const double t = 1e-5;
      a[i] += t;
      b[i] -= t;
      const double fd = (mechanical_energy(p.with_values(a), beta, tau, alpha).total() -
                         mechanical_energy(p.with_values(b), beta, tau, alpha).total()) /
                        (2 * t);
      EXPECT_NEAR(fd, p.dx() * (beta * d4[i] - tau_eff * d2[i]), 1e-6 * std::max(1.0, std::abs(fd))) << i;
    }
  }
}

TEST(ElectrostaticEnergy, FlatPlateClosedForm) {
  const DeflectionProfile p = DeflectionProfile::flat(1.0, 1.0, 64);
  EXPECT_NEAR(electrostatic_energy(p, unit_model(1.0), {32}).total(), -0.5, 1e-12);
  EXPECT_EQ(electrostatic_energy(p, unit_model(0.0), {32}).total(), 0.0);
  EXPECT_NEAR(electrostatic_energy(p, unit_model(2.0), {32}).total(), -2.0, 1e-12);
  // -L sigma V^2 / (1 + sigma H) with sigma = 3, H = 1.
  EXPECT_NEAR(electrostatic_energy(p, make_example_model(1.0, Sigma::constant(3.0), 1.0), {32}).total(), -0.75,
              1e-12);
}

TEST(ElectrostaticEnergy, EqualsMinusMinimizedFunctional) {
  std::mt19937_64 rng(4);
  const DielectricModel model = unit_model(1.0);
  const DeflectionProfile p = mems::test::random_profile(rng, 64);
  const PotentialField f = solve_potential(p, model, {32});
  EXPECT_DOUBLE_EQ(electrostatic_energy(f, model, p).total(), -f.functional().total());
}

TEST(ElectrostaticEnergy, ContinuousUnderShrinkingPerturbation) {
  const DielectricModel model = unit_model(1.0);
  const DeflectionProfile p = bump(-0.4, 64);
  const double e0 = electrostatic_energy(p, model, {32}).total();
  double prev = 1e300;
  for (int j = 1; j <= 8; ++j) {
    const double d = std::pow(2.0, -j);
    std::vector<double> v = p.values();
    for (int i = 0; i <= 64; ++i) v[i] += d * 0.3 * std::sin(M_PI * (p.x(i) + 1)) * (1 - p.x(i) * p.x(i));
    const double diff = std::abs(electrostatic_energy(p.with_values(v), model, {32}).total() - e0);
    EXPECT_LT(diff, prev) << "delta = " << d;
    prev = diff;
  }
}

TEST(Penalty, InactiveBelowLevel) {
  const DielectricModel model = unit_model(0.1);
  const ModelConstants c = unit_constants(model);
  const EnergyReport r = total_energy(bump(0.5, 64), model, c, 1.0, {16});
  EXPECT_EQ(r.penalty, 0.0);
  EXPECT_EQ(r.E_k, r.E_total);
}

TEST(Penalty, UnitExcessOnUnitInterval) {
  // (u - k)_+ = 1 on |x| < 1/2 and 1/sqrt(2) at x = +-1/2, so the trapezoid rule gives exactly 1.
  const int n = 64;
  const double k = 1.0;
  DeflectionProfile p = DeflectionProfile::flat(1.0, 1.0, n);
  std::vector<double> u = p.values();
  for (int i = 0; i <= n; ++i) {
    const double ax = std::abs(p.x(i));
    if (ax < 0.5 - 1e-12) u[i] = k + 1.0;
    else if (ax < 0.5 + 1e-12) u[i] = k + std::sqrt(0.5);
  }
  const ModelConstants c = unit_constants(unit_model(1.0));
  ASSERT_EQ(c.A, 24.0);
  const EnergyReport r = make_report(p.with_values(u), {}, c, k);
  EXPECT_NEAR(r.penalty, 12.0, 1e-12);
}

TEST(Penalty, RejectsLevelBelowGap) {
  const ModelConstants c = unit_constants(unit_model(1.0));
  EXPECT_THROW(make_report(bump(0.1, 16), {}, c, 0.5), InvalidInput);
}

TEST(Coercivity, LowerBoundHoldsAlongScaledQuartics) {
  const DielectricModel model = unit_model(1.0);
  const ModelConstants c = unit_constants(model);
  const double k = 1.0, ck = coercivity_constant(c, k);
  for (int n = 1; n <= 10; ++n) {
    const DeflectionProfile u = bump(n, 128);
    const EnergyReport r = total_energy(u, model, c, k, {32});
    const double bend_sq = 2.0 * r.mechanical.bending / c.beta;
    EXPECT_GE(r.E_k, 0.25 * c.beta * bend_sq - ck) << "n = " << n;
  }
}

TEST(Coercivity, SelfStretchingGrowsQuartically) {
  const DielectricModel model = unit_model(0.0);
  const ModelConstants c = unit_constants(model, 1.0, 0.0, 1.0);
  const DeflectionProfile u0 = bump(1.0, 64);
  auto E = [&](double t) {
    std::vector<double> v = u0.values();
    for (double& x : v) x *= t;
    return total_energy(u0.with_values(v), model, c, std::nullopt, {8}).E_total;
  };
  for (double t : {10.0, 20.0, 40.0}) EXPECT_GT(E(2 * t) / E(t), 14.0) << "t = " << t;
}

TEST(Force, FlatPlateValue) {
  const DeflectionProfile p = DeflectionProfile::flat(1.0, 1.0, 64);
  for (auto [V, g] : {std::pair{1.0, 0.125}, std::pair{0.0, 0.0}, std::pair{2.0, 0.5}}) {
    const DielectricModel model = unit_model(V);
    const ForceProfile f = compute_force(p, model, solve_potential(p, model, {32}));
    for (double gi : f.g) EXPECT_NEAR(gi, g, 1e-12) << "V = " << V;
  }
}

TEST(Force, PairingWithQuartic) {
  const DeflectionProfile p = DeflectionProfile::flat(1.0, 1.0, 256);
  const DielectricModel model = unit_model(1.0);
  const ForceProfile f = compute_force(p, model, solve_potential(p, model, {128}));
  EXPECT_NEAR(force_pairing(p, f.g, quartic_direction(p)), 2.0 / 15.0, 1e-4);
}

TEST(Force, ZeroDirectionAndZeroVoltage) {
  const DeflectionProfile p = DeflectionProfile::flat(1.0, 1.0, 32);
  const auto rows = directional_derivative_check(p, std::vector<double>(33, 0.0), unit_model(1.0), {1e-2, 1e-3}, {16});
  for (const DirectionalRow& r : rows) {
    EXPECT_EQ(r.fd, 0.0);
    EXPECT_EQ(r.pairing, 0.0);
  }
  const auto z = directional_derivative_check(p, quartic_direction(p), unit_model(0.0), {1e-2, 1e-3}, {16});
  for (const DirectionalRow& r : z) {
    EXPECT_EQ(r.fd, 0.0);
    EXPECT_EQ(r.pairing, 0.0);
  }
}

TEST(Force, FirstOrderFiniteDifferenceConsistency) {
  const DielectricModel model = unit_model(1.0);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int t = 0; t < 3; ++t) {
    const double a = 0.4 * U(rng), b = 0.3 * U(rng);
    const DeflectionProfile u = DeflectionProfile::from_function(1.0, 1.0, 128, [=](double x) {
      const double q = 1 - x * x;
      return q * q * (a + b * x);
    });
    std::vector<double> th(129);
    const int m = 1 + t;
    for (int i = 0; i <= 128; ++i) th[i] = std::sin(m * M_PI * (u.x(i) + 1) / 2) * (1 - u.x(i) * u.x(i));
    const auto rows = directional_derivative_check(u, th, model, {1e-2, 1e-3, 1e-4}, {64});
    const double slope = std::log10(rows[0].gap / rows[1].gap);
    EXPECT_NEAR(slope, 1.0, 0.3) << "draw " << t;
    EXPECT_LE(rows[2].gap, rows[1].gap);
    EXPECT_LE(rows[2].gap, 2e-3 * std::abs(rows[2].pairing)) << "draw " << t;
  }
}

TEST(Force, DiscreteGradientMatchesEnergyDifferences) {
  const DielectricModel model = unit_model(3.0);
  const DeflectionProfile u = DeflectionProfile::from_function(1.0, 1.0, 64, [](double x) {
    return std::max(-1.0, -1.3 * (1 - x * x) * (1 - x * x));
  });
  const PotentialField f = solve_potential(u, model, {32});
  ASSERT_GT(f.coincidence.contact_count(), 0);
  const std::vector<double> grad = discrete_energy_gradient(u, model, f, compute_force(u, model, f));
  for (double xc : {-0.8, -0.65, 0.7}) {
    std::vector<double> th(65, 0.0);
    for (int i = 0; i <= 64; ++i) {
      const double s = (u.x(i) - xc) / 0.08;
      if (std::abs(s) < 1 && !f.coincidence.in_contact(i)) th[i] = (1 - s * s) * (1 - s * s);
    }
    const double pair = force_pairing(u, grad, th);
    // Central difference of E_e; error O(s^2).
    const double s = 1e-6;
    std::vector<double> a = u.values(), b = u.values();
    for (int i = 0; i <= 64; ++i) {
      a[i] += s * th[i];
      b[i] -= s * th[i];
    }
    const double fd = (electrostatic_energy(u.with_values(a), model, {32}).total() -
                       electrostatic_energy(u.with_values(b), model, {32}).total()) /
                      (2 * s);
    EXPECT_NEAR(pair, fd, 1e-7 * std::abs(fd)) << "xc = " << xc;
  }
}

TEST(Force, LowerBoundOnCorpus) {
  const DielectricModel model = make_example_model(1.0, Sigma::constant(1.0), 1.0);
  DielectricModel m = model;
  m.set_K(estimate_K(model, SampleBox{4.0}).K);
  const ModelConstants c = unit_constants(m);
  std::mt19937_64 rng(31);
  for (int t = 0; t < 12; ++t) {
    const DeflectionProfile p = mems::test::random_profile(rng, 64, 1.0, t % 3 == 0);
    const ForceProfile f = compute_force(p, m, solve_potential(p, m, {32}));
    EXPECT_GE(f.min(), -c.G0) << "profile " << t;
  }
}

TEST(Force, NonContactBranchApproachesContactBranch) {
  // Flat plate at gap delta over |x| < 0.4; g at x = 0 from the non-contact formula tends to the contact value.
  const DielectricModel model = unit_model(1.0);
  const HSample h = model.h(0.0, -1.0, -1.0);
  const double g_contact = 0.5 * h.dw * h.dw - 0.5 * (h.dx * h.dx + (h.dz + h.dw) * (h.dz + h.dw));
  ASSERT_NEAR(g_contact, 0.5, 1e-15);
  double prev = 1e300;
  for (double delta : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const DeflectionProfile p = DeflectionProfile::from_function(1.0, 1.0, 100, [delta](double x) {
      const double a = std::abs(x);
      if (a <= 0.4) return -1.0 + delta;
      const double t = (a - 0.4) / 0.6;
      return (-1.0 + delta) * (1 - t * t) * (1 - t * t);
    });
    const PotentialField f = solve_potential(p, model, {32});
    ASSERT_FALSE(f.coincidence.in_contact(50));
    const double diff = std::abs(compute_force(p, model, f).g[50] - g_contact);
    EXPECT_LT(diff, prev) << "delta = " << delta;
    prev = diff;
  }
  EXPECT_LT(prev, 1e-3);
}
