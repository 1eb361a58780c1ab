#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "mems/dielectric_model.hpp"
#include "mems/error.hpp"
#include "mems/quadrature.hpp"

namespace mems {

// Nodal deflection on N_x uniform cells of [-L, L]. Boundary conditions are carried by the
// mode: the end values are pinned to zero and the slope or curvature condition is encoded
// through ghost nodes in the discrete operators.
class DeflectionProfile {
 public:
  DeflectionProfile(double L, double H, std::vector<double> u, BcMode bc = BcMode::clamped)
      : L_(L), H_(H), u_(std::move(u)), bc_(bc) {
    require(L > 0.0 && H > 0.0, "profile needs positive L and H");
    require(u_.size() >= 3, "profile needs at least two cells");
    for (std::size_t i = 0; i < u_.size(); ++i) {
      require(std::isfinite(u_[i]), "profile value at node " + std::to_string(i) + " is not finite");
      require(u_[i] >= -H, "profile violates the obstacle u >= -H at node " + std::to_string(i));
    }
    require(std::abs(u_.front()) <= 1e-12 && std::abs(u_.back()) <= 1e-12,
            "profile must vanish at x = -L and x = L");
    u_.front() = u_.back() = 0.0;
  }

  static DeflectionProfile from_function(double L, double H, int nx,
                                         const std::function<double(double)>& f,
                                         BcMode bc = BcMode::clamped) {
    require(nx >= 2, "profile needs at least two cells");
    std::vector<double> u(nx + 1);
    for (int i = 0; i <= nx; ++i) u[i] = f(-L + 2.0 * L * i / nx);
    u.front() = u.back() = 0.0;
    return DeflectionProfile(L, H, std::move(u), bc);
  }

  static DeflectionProfile flat(double L, double H, int nx, BcMode bc = BcMode::clamped) {
    return DeflectionProfile(L, H, std::vector<double>(nx + 1, 0.0), bc);
  }

  int cells() const { return static_cast<int>(u_.size()) - 1; }
  int nodes() const { return static_cast<int>(u_.size()); }
  double L() const { return L_; }
  double H() const { return H_; }
  BcMode bc() const { return bc_; }
  double dx() const { return 2.0 * L_ / cells(); }
  double x(int i) const { return -L_ + dx() * i; }
  double operator[](int i) const { return u_[i]; }
  const std::vector<double>& values() const { return u_; }
  double gap(int i) const { return H_ + u_[i]; }

  // Centered difference; the clamped end slope is zero, the pinned one is a one-sided
  // second-order difference.
  double slope(int i) const {
    const int n = cells();
    const double h = dx();
    if (i > 0 && i < n) return (u_[i + 1] - u_[i - 1]) / (2.0 * h);
    if (bc_ == BcMode::clamped) return 0.0;
    if (i == 0) return (-3.0 * u_[0] + 4.0 * u_[1] - u_[2]) / (2.0 * h);
    return (3.0 * u_[n] - 4.0 * u_[n - 1] + u_[n - 2]) / (2.0 * h);
  }

  DeflectionProfile mirrored() const {
    std::vector<double> r(u_.rbegin(), u_.rend());
    return DeflectionProfile(L_, H_, std::move(r), bc_);
  }

  DeflectionProfile with_values(std::vector<double> u) const {
    return DeflectionProfile(L_, H_, std::move(u), bc_);
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write profile '" + path + "'");
    out << "x,u\n" << std::setprecision(17);
    for (int i = 0; i < nodes(); ++i) out << x(i) << ',' << u_[i] << '\n';
  }

  // Reads (x, u) rows written by write_csv; L is taken from the abscissae.
  static DeflectionProfile read_csv(const std::string& path, double H, BcMode bc = BcMode::clamped) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open profile '" + path + "'");
    std::vector<double> xs, us;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == 'x') continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream row(line);
      double a, b;
      if (!(row >> a >> b)) throw InvalidInput("malformed profile row: " + line);
      xs.push_back(a);
      us.push_back(b);
    }
    require(xs.size() >= 3, "profile file has fewer than three rows");
    const double L = 0.5 * (xs.back() - xs.front());
    require(std::abs(xs.front() + L) <= 1e-9 * L, "profile abscissae must be symmetric about 0");
    return DeflectionProfile(L, H, std::move(us), bc);
  }

 private:
  double L_, H_;
  std::vector<double> u_;
  BcMode bc_;
};

// Inclusive range of non-contact node indices.
struct Component {
  int first = 0, last = 0;
};

struct CoincidenceSet {
  std::vector<char> contact;
  std::vector<Component> components;
  double gap_threshold = 0;
  int absorbed = 0;  // non-contact nodes reclassified as contact (sub-resolution slivers)

  bool in_contact(int i) const { return contact[i] != 0; }
  int contact_count() const { return static_cast<int>(std::count(contact.begin(), contact.end(), 1)); }
};

inline constexpr int kMinComponentCells = 3;

inline CoincidenceSet detect_coincidence(const DeflectionProfile& p, double gap_threshold) {
  require(gap_threshold >= 0.0, "gap threshold must be non-negative");
  const int n = p.cells();
  CoincidenceSet cs;
  cs.gap_threshold = gap_threshold;
  cs.contact.assign(n + 1, 0);
  for (int i = 1; i < n; ++i) cs.contact[i] = p.gap(i) <= gap_threshold ? 1 : 0;
  int i = 0;
  while (i <= n) {
    if (cs.contact[i]) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 <= n && !cs.contact[j + 1]) ++j;
    // Cells spanned by the component including its bounding contact nodes.
    const int lo = i == 0 ? 0 : i - 1;
    const int hi = j == n ? n : j + 1;
    if (hi - lo < kMinComponentCells && i != 0 && j != n) {
      for (int k = i; k <= j; ++k) cs.contact[k] = 1;
      cs.absorbed += j - i + 1;
    } else {
      cs.components.push_back({i, j});
    }
    i = j + 1;
  }
  return cs;
}

struct Metric {
  double a11 = 0, a12 = 0, a22 = 0;
  double det() const { return a11 * a22 - a12 * a12; }
};

// Reference rectangle for one component. Local x-node 0 is global node `lo`; the mesh spans
// from the bounding contact node (or the wall) on each side, and the lateral edges carry
// homogeneous Dirichlet data.
class MappedMesh {
 public:
  MappedMesh(const DeflectionProfile& p, const Component& c, int n_eta)
      : n_eta_(n_eta), nglobal_(p.cells()), dx_(p.dx()), deta_(1.0 / n_eta), H_(p.H()), comp_(c) {
    require(n_eta >= 2, "mapped mesh needs at least two cells in eta");
    require(c.first >= 0 && c.last < p.nodes() && c.first <= c.last, "component out of range");
    lo_ = c.first == 0 ? 0 : c.first - 1;
    hi_ = c.last == p.cells() ? p.cells() : c.last + 1;
    const int nc = hi_ - lo_;
    x_.resize(nc + 1);
    gap_.resize(nc + 1);
    slope_.resize(nc + 1);
    for (int k = 0; k <= nc; ++k) {
      x_[k] = p.x(lo_ + k);
      gap_[k] = std::max(p.gap(lo_ + k), 0.0);
      slope_[k] = p.slope(lo_ + k);
    }
    cell_slope_.resize(nc);
    qgap_.resize(2 * nc);
    for (int k = 0; k < nc; ++k) {
      cell_slope_[k] = (p[lo_ + k + 1] - p[lo_ + k]) / dx_;
      for (int a = 0; a < 2; ++a) {
        const double t = quad::kGauss2[a];
        const double g = (1.0 - t) * gap_[k] + t * gap_[k + 1];
        if (!(g > 0.0))
          throw SolverError("singular metric: non-positive gap at quadrature point near x = " +
                            std::to_string(x_[k] + t * dx_));
        qgap_[2 * k + a] = g;
      }
    }
  }

  const Component& component() const { return comp_; }
  // Local x-node k belongs to the component proper (not a bounding contact node).
  bool owns(int k) const { return lo_ + k >= comp_.first && lo_ + k <= comp_.last; }
  // Global trapezoid weight of the bottom node under local x-node k.
  double bottom_weight(int k) const {
    const int gi = lo_ + k;
    return (gi == 0 || gi == nglobal_) ? 0.5 * dx_ : dx_;
  }
  int lo() const { return lo_; }
  int hi() const { return hi_; }
  int cells_x() const { return hi_ - lo_; }
  int cells_eta() const { return n_eta_; }
  double dx() const { return dx_; }
  double deta() const { return deta_; }
  double H() const { return H_; }
  double x(int k) const { return x_[k]; }
  double eta(int j) const { return j * deta_; }
  double gap(int k) const { return gap_[k]; }
  double slope(int k) const { return slope_[k]; }
  double cell_slope(int k) const { return cell_slope_[k]; }
  double quad_gap(int k, int a) const { return qgap_[2 * k + a]; }
  double quad_x(int k, int a) const { return x_[k] + quad::kGauss2[a] * dx_; }
  double quad_eta(int j, int b) const { return (j + quad::kGauss2[b]) * deta_; }
  double quad_z(int k, int a, int j, int b) const { return -H_ + quad_eta(j, b) * quad_gap(k, a); }

  Metric metric(int k, int a, int j, int b) const {
    const double g = quad_gap(k, a), gp = cell_slope_[k], eta = quad_eta(j, b);
    return {g, -eta * gp, (1.0 + eta * eta * gp * gp) / g};
  }

  // Physical node coordinate z for local node (k, j).
  double z(int k, int j) const { return -H_ + eta(j) * gap_[k]; }

 private:
  int n_eta_, nglobal_;
  double dx_, deta_, H_;
  Component comp_;
  int lo_ = 0, hi_ = 0;
  std::vector<double> x_, gap_, slope_, cell_slope_, qgap_;
};

inline MappedMesh build_mapped_mesh(const DeflectionProfile& p, const Component& c, int n_eta) {
  return MappedMesh(p, c, n_eta);
}

}  // namespace mems
