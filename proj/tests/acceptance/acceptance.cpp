// Acceptance battery: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mems/app/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mems;
using namespace mems::app;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt_detail(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && dt > budget_s) {
    o.pass = false;
    o.detail += fmt_detail(" [over budget %.0f s]", budget_s);
  }
  failures += !o.pass;
  std::printf("%s  %2d %-40s %7.2f s  %s\n", o.pass ? "PASS" : "FAIL", id, name, dt, o.detail.c_str());
  std::fflush(stdout);
}

DielectricModel unit_model(double V) { return make_example_model(V, Sigma::constant(1.0), 1.0, 1.0, 1.0); }

// Injected-load problem on v = 0: chi* = cos(pi x/2) (-z (z + 3/2)) solves the field problem with
// f = cos(pi x/2) [(pi^2/4)(-z(z + 3/2)) + 2], zero on the sides and top, Robin with sigma = 1 at z = -1.
double manufactured_error(int n) {
  const DielectricModel model = unit_model(0.0);
  PotentialOptions opt;
  opt.n_eta = n;
  opt.source = [](double x, double z) {
    const double pi = std::numbers::pi;
    return std::cos(pi * x / 2) * (pi * pi / 4 * (-z * (z + 1.5)) + 2.0);
  };
  const PotentialField f = solve_potential(DeflectionProfile::flat(1.0, 1.0, n), model, opt);
  const ComponentField& c = f.components.at(0);
  const MappedMesh& m = c.mesh;
  auto exact = [](double x, double z) { return std::cos(std::numbers::pi * x / 2) * (-z * (z + 1.5)); };
  double err = 0;
  for (int k = 0; k < m.cells_x(); ++k)
    for (int j = 0; j < m.cells_eta(); ++j)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const double s = quad::kGauss3Nodes[a], t = quad::kGauss3Nodes[b];
          const double uh = (1 - s) * (1 - t) * c.at(k, j) + s * (1 - t) * c.at(k + 1, j) +
                            (1 - s) * t * c.at(k, j + 1) + s * t * c.at(k + 1, j + 1);
          const double e = uh - exact(m.x(k) + s * m.dx(), -1.0 + (j + t) * m.deta());
          err += quad::kGauss3Weights[a] * quad::kGauss3Weights[b] * m.dx() * m.deta() * e * e;
        }
  return std::sqrt(err);
}

DeflectionProfile random_profile(std::mt19937_64& rng, int nx) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const bool contact = U(rng) < 0.3;
  const double amp = contact ? -(1.05 + 0.6 * U(rng)) : -0.9 + 2.0 * U(rng);
  const double wig = 0.4 * (U(rng) - 0.5), shift = 0.3 * (U(rng) - 0.5);
  const int m = 1 + static_cast<int>(3 * U(rng));
  return DeflectionProfile::from_function(1.0, 1.0, nx, [=](double x) {
    const double q = 1.0 - x * x;
    return std::max(amp * q * q * (1.0 + wig * std::sin(m * std::numbers::pi * (x + shift))), -1.0);
  });
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

double sup_diff(const DeflectionProfile& a, const DeflectionProfile& b) {
  double d = 0;
  for (int i = 0; i <= a.cells(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

struct Minimizer {
  DeflectionProfile profile;
  double kappa0;
};
std::vector<Minimizer> corpus;

RunConfig default_config() { return load_config(fs::path(MEMS_SAMPLES_DIR) / "default.json"); }

}  // namespace

int main() {
  std::printf("acceptance battery\n");

  criterion(1, "exact cancellation, flat plate", 5, [] {
    const DielectricModel model = unit_model(1.0);
    const DeflectionProfile p = DeflectionProfile::flat(1.0, 1.0, 256);
    const PotentialField f = solve_potential(p, model, {128});
    const double ee = electrostatic_energy(f, model, p).total();
    const double chi = f.chi_sup();
    return Outcome{chi <= 1e-10 && std::abs(ee + 0.5) <= 1e-6,
                   fmt_detail("|chi|_inf = %.2e, E_e = %.12f (closed form -0.5)", chi, ee)};
  });

  criterion(2, "manufactured solution order", 30, [] {
    std::vector<double> e;
    for (int n : {32, 64, 128, 256}) e.push_back(manufactured_error(n));
    bool ok = true;
    std::string orders;
    for (std::size_t i = 1; i < e.size(); ++i) {
      const double q = std::log2(e[i - 1] / e[i]);
      ok = ok && std::abs(q - 2.0) <= 0.2;
      orders += fmt_detail(" %.3f", q);
    }
    return Outcome{ok, fmt_detail("L2 errors %.2e .. %.2e, orders", e.front(), e.back()) + orders};
  });

  criterion(3, "maximum principle, 20 profiles", 60, [] {
    const DielectricModel model = unit_model(1.0);
    std::mt19937_64 rng(20240611);
    double lo = 1e300, hi = -1e300;
    for (int t = 0; t < 20; ++t) {
      const DeflectionProfile p = random_profile(rng, 256);
      const MaxPrincipleReport r = max_principle_check(solve_potential(p, model, {128}), model, p);
      lo = std::min(lo, r.min_psi);
      hi = std::max(hi, r.max_psi);
    }
    return Outcome{lo >= -1e-6 && hi <= 1.0 + 1e-6, fmt_detail("psi in [%.3e, %.12f]", lo, hi)};
  });

  criterion(4, "shape derivative audit", 60, [] {
    const DielectricModel model = unit_model(1.0);
    const DeflectionProfile u = DeflectionProfile::flat(1.0, 1.0, 256);
    std::vector<double> th(257);
    for (int i = 0; i <= 256; ++i) th[i] = std::pow(1.0 - u.x(i) * u.x(i), 2);
    const auto rows = directional_derivative_check(u, th, model, {1e-2, 1e-3, 1e-4}, {128});
    const double pairing = rows[0].pairing;
    const double s1 = std::log10(rows[0].gap / rows[1].gap), s2 = std::log10(rows[1].gap / rows[2].gap);
    const bool ok = std::abs(pairing - 2.0 / 15.0) <= 1e-4 && rows[1].gap < rows[0].gap && rows[2].gap < rows[1].gap &&
                    std::abs(s1 - 1.0) <= 0.3 && std::abs(s2 - 1.0) <= 0.3;
    return Outcome{ok, fmt_detail("int g theta = %.8f, gaps %.2e %.2e %.2e, slopes %.3f %.3f", pairing, rows[0].gap,
                                  rows[1].gap, rows[2].gap, s1, s2)};
  });

  criterion(5, "variational inequality at V = 0.1", 120, [] {
    const RunConfig cfg = default_config();
    const DielectricModel m = build_model(cfg);
    const ModelConstants c = build_constants(cfg, m);
    const MinimizeResult r = minimize(initial_profile(cfg), m, c, minimize_options(cfg));
    corpus.push_back({r.profile, c.kappa0});
    const VIResidual& v = r.residual;
    const double act = v.active_count ? v.active_min : 0.0;
    const bool ok = r.converged && v.stationarity <= 1e-8 && act >= -1e-8 && v.feasibility == 0.0;
    return Outcome{ok, fmt_detail("nx = %d, %s in %d it, stationarity %.2e, active %d, feasibility %.1e "
                                  "(trace-force stationarity %.2e)",
                                  r.profile.cells(), r.status.c_str(), r.iterations, v.stationarity, v.active_count,
                                  v.feasibility, r.residual_trace.stationarity)};
  });

  criterion(6, "penalty removal, k = kappa0 vs 2 kappa0", 240, [] {
    std::string detail;
    bool ok = true;
    // Default config, then a run driven onto the obstacle.
    for (int variant = 0; variant < 2; ++variant) {
      RunConfig cfg = default_config();
      if (variant == 1) {
        cfg.material.beta = 0.01;
        cfg.dielectric.V = 3.0;
        cfg.grid.nx = 128;
        cfg.grid.neta = 64;
        cfg.minimize.initial_amplitude = -0.5;
        cfg.minimize.max_iters = 400;
      }
      const DielectricModel m = build_model(cfg);
      const ModelConstants c = build_constants(cfg, m);
      MinimizeOptions o = minimize_options(cfg);
      o.k = c.kappa0;
      const MinimizeResult a = minimize(initial_profile(cfg), m, c, o);
      o.k = 2.0 * c.kappa0;
      const MinimizeResult b = minimize(initial_profile(cfg), m, c, o);
      corpus.push_back({a.profile, c.kappa0});
      corpus.push_back({b.profile, c.kappa0});
      const double d = sup_diff(a.profile, b.profile);
      const double pa = beam::penalty_norm_sq(a.profile, a.k), pb = beam::penalty_norm_sq(b.profile, b.k);
      ok = ok && a.converged && b.converged && d <= 1e-8 && pa == 0.0 && pb == 0.0;
      detail += fmt_detail("%s: sup diff %.2e, contact nodes %d; ", variant ? "touchdown" : "default", d,
                           a.residual.active_count);
    }
    return Outcome{ok, detail};
  });

  criterion(7, "a-priori bound", 0, [] {
    const ModelConstants c =
        compute_constants(unit_model(1.0), 1.0, 0.0, 0.0, 1.0, 1.0, BcMode::clamped);
    bool ok = c.A == 24.0 && c.G0 == 3.0 && !corpus.empty();
    double worst = 1e300;
    for (const Minimizer& m : corpus) {
      const double mx = *std::max_element(m.profile.values().begin(), m.profile.values().end());
      worst = std::min(worst, m.kappa0 - mx);
    }
    ok = ok && worst > 0;
    return Outcome{ok, fmt_detail("A = %g, G0 = %g, kappa0 = %g; %zu minimizers, smallest margin %.4g", c.A, c.G0,
                                  c.kappa0, corpus.size(), worst)};
  });

  const OracleOptions oo;
  criterion(8, "beam oracle", 5, [&] {
    const json j = beam_report(oo);
    return Outcome{j["pass"].get<bool>(),
                   fmt_detail("max S = %.15f, sup %.3f <= %.0f, %d draws, worst ODE %.1e, BC %.1e",
                              j["reference"]["max_S"].get<double>(), j["reference"]["sup_norm"].get<double>(),
                              j["reference"]["bound"].get<double>(), j["random"]["draws"].get<int>(),
                              j["random"]["worst_ode_residual"].get<double>(),
                              j["random"]["worst_bc_residual"].get<double>())};
  });

  criterion(9, "integration-by-parts identities", 30, [&] {
    const json j = identity_report(oo);
    return Outcome{j["pass"].get<bool>(),
                   fmt_detail("rectangle %.1e (ratio %.2f), mapped %.1e (ratio %.2f), curved-graph order %.2f",
                              j["rectangle"]["residuals"][2].get<double>(), j["rectangle"]["ratio"].get<double>(),
                              j["mapped_constant"]["residuals"][2].get<double>(),
                              j["mapped_constant"]["ratio"].get<double>(),
                              j["mapped_bump"]["observed_order"].get<double>())};
  });

  criterion(10, "functional inequality battery", 60, [&] {
    const json j = inequality_report(oo);
    return Outcome{j["pass"].get<bool>(), fmt_detail("%d samples, %d checks, %zu violations", j["samples"].get<int>(),
                                                     j["checks"].get<int>(), j["violations"].size())};
  });

  criterion(11, "determinism of the default run", 0, [] {
    const RunConfig cfg = default_config();
    const fs::path base = fs::temp_directory_path() / "mems_acceptance_determinism";
    fs::remove_all(base);
    execute_run(cfg, base / "a");
    execute_run(cfg, base / "b");
    int files = 0;
    bool ok = true;
    for (const auto& e : fs::directory_iterator(base / "a")) {
      const fs::path other = base / "b" / e.path().filename();
      ++files;
      if (e.path().filename() == "run.json") {
        json ja = json::parse(slurp(e.path())), jb = json::parse(slurp(other));
        ja.erase("metadata");
        jb.erase("metadata");
        ok = ok && ja.dump() == jb.dump();
      } else {
        ok = ok && fs::exists(other) && slurp(e.path()) == slurp(other);
      }
    }
    fs::remove_all(base);
    return Outcome{ok && files > 0, fmt_detail("%d artifacts compared", files)};
  });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
