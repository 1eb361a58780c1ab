#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "mems/dielectric_model.hpp"
#include "mems/error.hpp"

namespace mems::oracle {

// Boundary configurations of beta S'''' - tau S'' = G0 on (a, b):
// 1: S = -H, S' = 0 at both ends; 2: clamped at a = -L, obstacle at b;
// 3: obstacle at a, clamped at b = L; 4: clamped at both ends.
enum class BeamCase { obstacle_both = 1, clamped_left = 2, clamped_right = 3, clamped_both = 4 };

class BeamOracleSolution {
 public:
  BeamOracleSolution(BeamCase c, double a, double b, double G0, double beta, double tau, double H)
      : case_(c), a_(a), b_(b), G0_(G0), beta_(beta), tau_(tau), H_(H) {
    require(beta > 0.0, "beam oracle needs beta > 0");
    require(tau >= 0.0, "beam oracle needs tau >= 0");
    require(a < b, "beam oracle needs a < b");
    mid_ = 0.5 * (a + b);
    half_ = 0.5 * (b - a);
    omega_ = std::sqrt(tau / beta);
    const double ya = value_at_left(), yb = value_at_right();
    Eigen::Matrix4d M;
    Eigen::Vector4d rhs;
    for (int j = 0; j < 4; ++j) {
      M(0, j) = basis(j, a, 0);
      M(1, j) = basis(j, a, 1);
      M(2, j) = basis(j, b, 0);
      M(3, j) = basis(j, b, 1);
    }
    rhs << ya - particular(a, 0), -particular(a, 1), yb - particular(b, 0), -particular(b, 1);
    Eigen::FullPivLU<Eigen::Matrix4d> lu(M);
    if (!lu.isInvertible()) throw SolverError("beam oracle boundary system is singular");
    coef_ = lu.solve(rhs);
  }

  // d-th derivative of S at x, d in 0..4.
  double operator()(double x, int d = 0) const {
    double s = particular(x, d);
    for (int j = 0; j < 4; ++j) s += coef_(j) * basis(j, x, d);
    return s;
  }

  double ode_residual(double x) const { return beta_ * (*this)(x, 4) - tau_ * (*this)(x, 2) - G0_; }

  // Worst relative ODE residual over n interior samples and worst boundary residual.
  std::array<double, 2> residuals(int n = 201) const {
    double ode = 0;
    for (int i = 0; i <= n; ++i) {
      const double x = a_ + (b_ - a_) * i / n;
      const double scale = std::abs(G0_) + std::abs(beta_ * (*this)(x, 4)) + std::abs(tau_ * (*this)(x, 2));
      ode = std::max(ode, std::abs(ode_residual(x)) / std::max(scale, 1e-300));
    }
    const double sc = std::max(1.0, sup_norm());
    const double bc = std::max({std::abs((*this)(a_) - value_at_left()), std::abs((*this)(a_, 1)),
                                std::abs((*this)(b_) - value_at_right()), std::abs((*this)(b_, 1))}) /
                      sc;
    return {ode, bc};
  }

  double sup_norm(int n = 4000) const {
    double m = 0;
    for (int i = 0; i <= n; ++i) m = std::max(m, std::abs((*this)(a_ + (b_ - a_) * i / n)));
    return m;
  }

  BeamCase which() const { return case_; }
  double a() const { return a_; }
  double b() const { return b_; }
  const Eigen::Vector4d& coefficients() const { return coef_; }

 private:
  double value_at_left() const {
    return (case_ == BeamCase::obstacle_both || case_ == BeamCase::clamped_right) ? -H_ : 0.0;
  }
  double value_at_right() const {
    return (case_ == BeamCase::obstacle_both || case_ == BeamCase::clamped_left) ? -H_ : 0.0;
  }

  // Homogeneous basis in xi = x - mid: {1, xi, xi^2, xi^3} for tau = 0 and
  // {1, xi, C, S} with C, S the cosh/sinh pair scaled by cosh(omega half) otherwise.
  double basis(int j, double x, int d) const {
    const double xi = x - mid_;
    if (j == 0) return d == 0 ? 1.0 : 0.0;
    if (j == 1) return d == 0 ? xi : (d == 1 ? 1.0 : 0.0);
    if (omega_ == 0.0) {
      const int p = j;  // 2 or 3
      if (d > p) return 0.0;
      double c = 1.0;
      for (int k = 0; k < d; ++k) c *= p - k;
      return c * std::pow(xi, p - d);
    }
    const double w = omega_, wd = std::pow(w, d);
    const double ep = std::exp(w * (xi - half_)), em = std::exp(-w * (xi + half_));
    const double norm = 1.0 + std::exp(-2.0 * w * half_);
    const bool even = (j == 2) == (d % 2 == 0);  // derivative of cosh is sinh
    return wd * (even ? (ep + em) : (ep - em)) / norm;
  }

  double particular(double x, int d) const {
    const double xi = x - mid_;
    if (omega_ == 0.0) {
      const double c = G0_ / (24.0 * beta_);
      switch (d) {
        case 0: return c * xi * xi * xi * xi;
        case 1: return 4.0 * c * xi * xi * xi;
        case 2: return 12.0 * c * xi * xi;
        case 3: return 24.0 * c * xi;
        case 4: return 24.0 * c;
        default: return 0.0;
      }
    }
    const double c = -G0_ / (2.0 * tau_);
    switch (d) {
      case 0: return c * xi * xi;
      case 1: return 2.0 * c * xi;
      case 2: return 2.0 * c;
      default: return 0.0;
    }
  }

  BeamCase case_;
  double a_, b_, G0_, beta_, tau_, H_;
  double mid_ = 0, half_ = 0, omega_ = 0;
  Eigen::Vector4d coef_;
};

inline BeamOracleSolution solve_beam_oracle(BeamCase c, double a, double b, double G0, double beta, double tau,
                                            double H) {
  return BeamOracleSolution(c, a, b, G0, beta, tau, H);
}

// Sup bound for the given configuration. For case 1 the solution lies in [-H, 16 L^4 G0/beta - H],
// so its sup norm is bounded by the larger of the two magnitudes.
inline double beam_case_bound(BeamCase c, double L, double G0, double beta, double tau, double H) {
  const double base = 16.0 * std::pow(L, 4) * G0 / beta;
  switch (c) {
    case BeamCase::obstacle_both: return std::max(H, base - H);
    case BeamCase::clamped_left:
    case BeamCase::clamped_right:
      return (16.0 * std::pow(L, 4) * G0 + 24.0 * beta + 56.0 * tau * (H + 1.0) * L * L) / beta + q_sup_norm(H);
    case BeamCase::clamped_both: return base;
  }
  return base;
}

}  // namespace mems::oracle
