#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/Splines>

#include "mems/error.hpp"

namespace mems {

enum class BcMode { clamped, pinned };

inline const char* to_string(BcMode m) { return m == BcMode::clamped ? "clamped" : "pinned"; }

inline BcMode bc_mode_from_string(const std::string& s) {
  if (s == "clamped") return BcMode::clamped;
  if (s == "pinned") return BcMode::pinned;
  throw InvalidInput("unknown bc_mode '" + s + "' (expected clamped or pinned)");
}

struct SigmaSample {
  double value = 0, d1 = 0, d2 = 0;
};

// Permittivity profile sigma(x) with its first two derivatives.
class Sigma {
 public:
  static Sigma constant(double c) {
    Sigma s;
    s.kind_ = "constant";
    s.eval_ = [c](double) { return SigmaSample{c, 0.0, 0.0}; };
    return s;
  }

  // Coefficients in ascending powers of x.
  static Sigma polynomial(std::vector<double> coeffs) {
    require(!coeffs.empty(), "polynomial sigma needs at least one coefficient");
    Sigma s;
    s.kind_ = "polynomial";
    s.eval_ = [c = std::move(coeffs)](double x) {
      SigmaSample r;
      for (std::size_t k = c.size(); k-- > 0;) {
        r.d2 = r.d2 * x + 2.0 * r.d1;
        r.d1 = r.d1 * x + r.value;
        r.value = r.value * x + c[k];
      }
      return r;
    };
    return s;
  }

  // C^2 cubic spline through (x_i, s_i); x strictly increasing, at least 4 samples.
  // Outside the table the end value and derivatives are held.
  static Sigma tabulated(const std::vector<double>& x, const std::vector<double>& values) {
    require(x.size() == values.size(), "tabulated sigma: x and sigma columns differ in length");
    require(x.size() >= 4, "tabulated sigma needs at least 4 samples");
    for (std::size_t i = 1; i < x.size(); ++i)
      require(x[i] > x[i - 1], "tabulated sigma: abscissae must be strictly increasing");
    using Spline1 = Eigen::Spline<double, 1>;
    const double x0 = x.front(), span = x.back() - x.front();
    Eigen::RowVectorXd pts(values.size()), par(values.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      pts(i) = values[i];
      par(i) = (x[i] - x0) / span;
    }
    auto spline = std::make_shared<Spline1>(Eigen::SplineFitting<Spline1>::Interpolate(pts, 3, par));
    Sigma s;
    s.kind_ = "tabulated";
    s.lo_ = x.front();
    s.hi_ = x.back();
    s.eval_ = [spline, x0, span](double xx) {
      const double u = std::clamp((xx - x0) / span, 0.0, 1.0);
      const auto d = spline->derivatives(u, 2);
      return SigmaSample{d(0, 0), d(0, 1) / span, d(0, 2) / (span * span)};
    };
    return s;
  }

  // Two-column CSV (x, sigma); a non-numeric first line is treated as a header.
  static Sigma from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open sigma table '" + path + "'");
    std::vector<double> xs, ss;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream row(line);
      double a, b;
      if (!(row >> a >> b)) {
        if (first) {
          first = false;
          continue;
        }
        throw InvalidInput("malformed row in sigma table '" + path + "': " + line);
      }
      first = false;
      xs.push_back(a);
      ss.push_back(b);
    }
    return tabulated(xs, ss);
  }

  SigmaSample operator()(double x) const { return eval_(x); }
  double value(double x) const { return eval_(x).value; }
  const std::string& kind() const { return kind_; }
  // Table range for tabulated profiles; infinite otherwise.
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  std::function<SigmaSample(double)> eval_;
  std::string kind_;
  double lo_ = -std::numeric_limits<double>::infinity();
  double hi_ = std::numeric_limits<double>::infinity();
};

struct HSample {
  double value = 0, dx = 0, dz = 0, dw = 0;
};

struct FrakSample {
  double value = 0, dw = 0;
};

// Boundary data (sigma, h, frak h) on D = (-L, L) with gap height H.
class DielectricModel {
 public:
  using HFn = std::function<HSample(double x, double z, double w)>;
  using FrakFn = std::function<FrakSample(double x, double w)>;

  DielectricModel(Sigma sigma, HFn h, FrakFn frak_h, double V, double H, double L,
                  std::optional<double> K = std::nullopt, std::string family = "custom")
      : sigma_(std::move(sigma)),
        h_(std::move(h)),
        frak_(std::move(frak_h)),
        V_(V),
        H_(H),
        L_(L),
        family_(std::move(family)) {
    require(std::isfinite(V) && V >= 0.0, "voltage scale V must be finite and non-negative");
    require(std::isfinite(H) && H > 0.0, "gap height H must be positive");
    require(std::isfinite(L) && L > 0.0, "half-width L must be positive");
    require(sigma_.lo() <= -L + 1e-12 && sigma_.hi() >= L - 1e-12,
            "tabulated sigma does not cover [-L, L]");
    constexpr int n = 2000;
    sigma_min_ = std::numeric_limits<double>::infinity();
    double m0 = 0, m1 = 0, m2 = 0;
    for (int i = 0; i <= n; ++i) {
      const double x = -L + 2.0 * L * i / n;
      const SigmaSample s = sigma_(x);
      sigma_min_ = std::min(sigma_min_, s.value);
      m0 = std::max(m0, std::abs(s.value));
      m1 = std::max(m1, std::abs(s.d1));
      m2 = std::max(m2, std::abs(s.d2));
    }
    sigma_bar_ = m0 + m1 + m2;
    require(sigma_min_ > 0.0, "sigma must be positive on [-L, L]");
    if (K) set_K(*K);
  }

  HSample h(double x, double z, double w) const { return h_(x, z, w); }
  FrakSample frak_h(double x, double w) const { return frak_(x, w); }
  SigmaSample sigma(double x) const { return sigma_(x); }
  const Sigma& sigma_profile() const { return sigma_; }

  double V() const { return V_; }
  double H() const { return H_; }
  double L() const { return L_; }
  double sigma_min() const { return sigma_min_; }
  // C^2 norm: max|sigma| + max|sigma'| + max|sigma''| over the sampled interval.
  double sigma_bar() const { return sigma_bar_; }
  const std::string& family() const { return family_; }

  bool has_K() const { return K_.has_value(); }
  double K() const {
    if (!K_) throw InvalidInput("growth constant K has not been set");
    return *K_;
  }
  void set_K(double K) {
    require(std::isfinite(K) && K >= 0.0, "growth constant K must be finite and non-negative");
    K_ = K;
  }

 private:
  Sigma sigma_;
  HFn h_;
  FrakFn frak_;
  double V_, H_, L_;
  std::optional<double> K_;
  double sigma_min_ = 0, sigma_bar_ = 0;
  std::string family_;
};

// h = V (1 + sigma(x)(H+z)) / (1 + sigma(x)(H+w)), frak h = 0.
inline DielectricModel make_example_model(double V, Sigma sigma, double H, double L = 1.0,
                                          std::optional<double> K = std::nullopt) {
  require(std::isfinite(V) && V >= 0.0, "voltage scale V must be finite and non-negative");
  auto h = [V, H, sigma](double x, double z, double w) {
    const SigmaSample s = sigma(x);
    const double den = 1.0 + s.value * (H + w);
    const double num = 1.0 + s.value * (H + z);
    HSample r;
    r.value = V * num / den;
    r.dz = V * s.value / den;
    r.dw = -V * s.value * num / (den * den);
    r.dx = V * s.d1 * (z - w) / (den * den);
    return r;
  };
  auto frak = [](double, double) { return FrakSample{}; };
  return DielectricModel(std::move(sigma), h, frak, V, H, L, K, "example");
}

// Sampling region x in [-L, L], z, w in [-H, z_max].
struct SampleBox {
  double z_max = 0;
  int nx = 33;
  int nzw = 50;
};

struct AssumptionReport {
  double max_residual = 0;
  double worst_x = 0, worst_w = 0;
  double sigma_min = 0;
  bool sigma_positive = true;
  bool ok = true;
};

inline AssumptionReport validate_assumptions(const DielectricModel& m, const SampleBox& box,
                                             double tol = 1e-12) {
  const double H = m.H(), L = m.L();
  require(std::isfinite(box.z_max) && box.z_max > -H, "sampling box needs finite z_max > -H");
  require(box.nx >= 2 && box.nzw >= 2, "sampling box needs at least two samples per axis");
  AssumptionReport rep;
  rep.sigma_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < box.nx; ++i) {
    const double x = -L + 2.0 * L * i / (box.nx - 1);
    const double s = m.sigma(x).value;
    rep.sigma_min = std::min(rep.sigma_min, s);
    for (int j = 0; j < box.nzw; ++j) {
      const double w = -H + (box.z_max + H) * j / (box.nzw - 1);
      const HSample hb = m.h(x, -H, w);
      const double res = std::abs(hb.dz - s * (hb.value - m.frak_h(x, w).value));
      if (res > rep.max_residual) {
        rep.max_residual = res;
        rep.worst_x = x;
        rep.worst_w = w;
      }
    }
  }
  rep.sigma_positive = rep.sigma_min > 0.0;
  rep.ok = rep.sigma_positive && rep.max_residual <= tol * std::max(1.0, m.V());
  return rep;
}

struct KEstimate {
  double K = 0;
  // Contributions of the individual growth bounds, in the order of kBoundNames.
  std::array<double, 5> contributions{};
  std::string binding;
  static constexpr std::array<const char*, 5> kBoundNames = {"grad_h", "dw_h", "bottom_h",
                                                             "plate_h", "plate_grad_h"};
};

namespace detail {

// Lattice in [-H, z_max] with spacing H/16 plus the end point, so that enlarging the box
// only adds samples.
inline std::vector<double> zw_lattice(double H, double z_max) {
  std::vector<double> pts;
  const double step = H / 16.0;
  for (int j = 0;; ++j) {
    const double t = -H + j * step;
    if (t > z_max - 1e-12 * H) break;
    pts.push_back(t);
  }
  pts.push_back(z_max);
  return pts;
}

}  // namespace detail

inline KEstimate estimate_K(const DielectricModel& m, const SampleBox& box) {
  const double H = m.H(), L = m.L();
  require(std::isfinite(box.z_max) && box.z_max > -H, "sampling box needs finite z_max > -H");
  const std::vector<double> zw = detail::zw_lattice(H, box.z_max);
  const int nx = std::max(box.nx, 2);
  std::array<double, 5> c{};
  for (int i = 0; i < nx; ++i) {
    const double x = -L + 2.0 * L * i / (nx - 1);
    for (double w : zw) {
      const double gap = H + w;
      const double wt6a = gap > 0 ? std::sqrt(gap / (1.0 + w * w)) : 0.0;
      const double wt6b = std::sqrt(std::max(gap, 0.0));
      for (double z : zw) {
        const HSample s = m.h(x, z, w);
        c[0] = std::max(c[0], (std::abs(s.dx) + std::abs(s.dz)) * wt6a);
        c[1] = std::max(c[1], std::abs(s.dw) * wt6b);
      }
      const FrakSample f = m.frak_h(x, w);
      c[2] = std::max(c[2], std::abs(m.h(x, -H, w).value) + std::abs(f.value));
      const HSample p = m.h(x, w, w);
      c[4] = std::max(c[4], std::abs(p.dx) + std::abs(p.dz) + std::abs(p.dw) + std::abs(f.dw));
    }
  }
  // The plate and lateral terms share w but not x or z.
  for (double w : zw) {
    double plate = 0, side = 0;
    for (int i = 0; i < nx; ++i)
      plate = std::max(plate, std::abs(m.h(-L + 2.0 * L * i / (nx - 1), w, w).value));
    for (double z : zw)
      side = std::max({side, std::abs(m.h(-L, z, w).value), std::abs(m.h(L, z, w).value)});
    c[3] = std::max(c[3], plate + side);
  }
  KEstimate est;
  est.contributions = c;
  const auto it = std::max_element(c.begin(), c.end());
  est.K = *it;
  est.binding = KEstimate::kBoundNames[it - c.begin()];
  return est;
}

// sup |Q| on [0,1] for Q(y) = y^2 (y^2 + 2(H-1) y + 1 - 3H).
inline double q_sup_norm(double H) {
  auto q = [H](double y) { return std::abs(y * y * (y * y + 2.0 * (H - 1.0) * y + 1.0 - 3.0 * H)); };
  constexpr int n = 4000;
  int best = 0;
  double best_val = q(0.0);
  for (int i = 1; i <= n; ++i) {
    const double v = q(static_cast<double>(i) / n);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double a = std::max(0.0, (best - 1.0) / n), b = std::min(1.0, (best + 1.0) / n);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  while (b - a > 1e-12) {
    if (q(c) > q(d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  return std::max({best_val, q(0.5 * (a + b)), q(1.0)});
}

struct ModelConstants {
  double A = 0, G0 = 0, kappa0 = 0;
  // Bounds for the four auxiliary beam configurations: both ends at the obstacle,
  // left clamped, right clamped (same value), both clamped.
  std::array<double, 4> kappa_cases{};
  double q_sup = 0;
  double K = 0, sigma_bar = 0;
  double beta = 0, tau = 0, alpha = 0, L = 0, H = 0;
  BcMode bc = BcMode::clamped;
};

inline ModelConstants compute_constants(const DielectricModel& m, double beta, double tau,
                                        double alpha, double L, double H, BcMode bc) {
  require(std::isfinite(beta) && beta > 0.0, "bending stiffness beta must be positive");
  require(std::isfinite(tau) && tau >= 0.0, "stretching coefficient tau must be non-negative");
  require(std::isfinite(alpha) && alpha >= 0.0, "self-stretching coefficient alpha must be non-negative");
  require(L > 0.0 && H > 0.0, "L and H must be positive");
  ModelConstants c;
  c.K = m.K();
  c.sigma_bar = m.sigma_bar();
  c.beta = beta;
  c.tau = tau;
  c.alpha = alpha;
  c.L = L;
  c.H = H;
  c.bc = bc;
  const double K2 = c.K * c.K;
  c.A = 8.0 * (K2 * K2 / beta + 2.0 * K2);
  c.G0 = 2.0 * c.sigma_bar * K2 + K2;
  c.q_sup = q_sup_norm(H);
  const double L4 = L * L * L * L;
  const double base = 16.0 * L4 * c.G0 / beta;
  c.kappa_cases[0] = base - H;
  c.kappa_cases[1] = (16.0 * L4 * c.G0 + 24.0 * beta + 56.0 * tau * (H + 1.0) * L * L) / beta + c.q_sup;
  c.kappa_cases[2] = c.kappa_cases[1];
  c.kappa_cases[3] = base;
  c.kappa0 = std::max(H, *std::max_element(c.kappa_cases.begin(), c.kappa_cases.end()));
  return c;
}

}  // namespace mems
