#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mems/app/config.hpp"
#include "mems/app/verify.hpp"
#include "mems/dielectric_model.hpp"
#include "mems/energy.hpp"
#include "mems/force.hpp"
#include "mems/geometry.hpp"
#include "mems/minimizer.hpp"
#include "mems/potential_solver.hpp"

namespace mems::app {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kRuntimeFailure = 1, kConfigFailure = 2 };

// Written to path.tmp and renamed, so readers never see a half-written file.
inline void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline std::string fmt(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// JSON has no infinities; they are written as null.
inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json metadata(double elapsed_seconds) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream t;
  t << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return {{"tool", "memsctl"}, {"version", kVersion}, {"generated_at", t.str()}, {"elapsed_seconds", elapsed_seconds}};
}

inline fs::path resolve(const RunConfig& c, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() || c.base_dir.empty() ? q : c.base_dir / q;
}

inline double box_top(const RunConfig& c) { return c.dielectric.z_max.value_or(4.0 * c.geometry.H); }

inline Sigma build_sigma(const RunConfig& c) {
  if (c.dielectric.family == "tabulated") return Sigma::from_csv(resolve(c, c.dielectric.sigma_csv).string());
  const auto& s = c.dielectric.sigma;
  return s.size() == 1 ? Sigma::constant(s[0]) : Sigma::polynomial(s);
}

// Model with K either from the config or estimated over [-L, L] x [-H, z_max]^2.
inline DielectricModel build_model(const RunConfig& c, KEstimate* estimate = nullptr) {
  DielectricModel m = make_example_model(c.dielectric.V, build_sigma(c), c.geometry.H, c.geometry.L);
  if (c.dielectric.K) {
    m.set_K(*c.dielectric.K);
  } else {
    const KEstimate e = estimate_K(m, SampleBox{box_top(c)});
    m.set_K(e.K);
    if (estimate) *estimate = e;
  }
  return m;
}

inline ModelConstants build_constants(const RunConfig& c, const DielectricModel& m) {
  return compute_constants(m, c.material.beta, c.material.tau, c.material.alpha, c.geometry.L, c.geometry.H,
                           c.bc_mode);
}

inline PotentialOptions potential_options(const RunConfig& c) {
  PotentialOptions p;
  p.n_eta = c.grid.neta;
  if (c.grid.gap_threshold) p.gap_threshold = *c.grid.gap_threshold;
  return p;
}

inline MinimizeOptions minimize_options(const RunConfig& c) {
  MinimizeOptions o;
  const auto& m = c.minimize;
  o.k = m.k;
  o.max_iters = m.max_iters;
  o.tol_stat = m.tol_stat;
  o.tol_act = m.tol_act;
  o.tol_energy = m.tol_energy;
  o.armijo = m.armijo;
  o.backtrack = m.backtrack;
  o.max_backtracks = m.max_backtracks;
  o.force_refresh = m.force_refresh;
  o.audit_every = m.audit_every;
  o.potential = potential_options(c);
  return o;
}

inline DeflectionProfile initial_profile(const RunConfig& c) {
  const double a = c.minimize.initial_amplitude, L = c.geometry.L;
  return DeflectionProfile::from_function(
      c.geometry.L, c.geometry.H, c.grid.nx,
      [a, L](double x) {
        const double q = 1.0 - (x / L) * (x / L);
        return a * q * q;
      },
      c.bc_mode);
}

inline json constants_json(const ModelConstants& c) {
  return {{"A", c.A},
          {"G0", c.G0},
          {"kappa0", c.kappa0},
          {"kappa_cases", c.kappa_cases},
          {"q_sup", c.q_sup},
          {"K", c.K},
          {"sigma_bar", c.sigma_bar},
          {"beta", c.beta},
          {"tau", c.tau},
          {"alpha", c.alpha},
          {"L", c.L},
          {"H", c.H},
          {"bc_mode", to_string(c.bc)}};
}

inline json energy_json(const EnergyReport& e) {
  return {{"E_m", e.E_m},
          {"bending", e.mechanical.bending},
          {"stretching", e.mechanical.stretching},
          {"self_stretching", e.mechanical.self_stretching},
          {"E_e", e.E_e},
          {"field", e.electrostatic.field},
          {"robin", e.electrostatic.robin},
          {"E_total", e.E_total},
          {"penalty", e.penalty},
          {"k", e.k ? json(*e.k) : json(nullptr)},
          {"E_k", e.E_k}};
}

inline std::string profile_csv(const DeflectionProfile& p, const ForceProfile& f, const PotentialField& field) {
  std::ostringstream s;
  s << "x,u,g,contact\n";
  for (int i = 0; i <= p.cells(); ++i)
    s << fmt(p.x(i)) << ',' << fmt(p[i]) << ',' << fmt(f.g[i]) << ',' << (field.coincidence.contact[i] ? 1 : 0)
      << '\n';
  return s.str();
}

inline std::string history_csv(const std::vector<HistoryRow>& h) {
  std::ostringstream s;
  s << "iter,E_m,E_e,E_k,stationarity,active_count\n";
  for (const HistoryRow& r : h)
    s << r.iter << ',' << fmt(r.E_m) << ',' << fmt(r.E_e) << ',' << fmt(r.E_k) << ',' << fmt(r.stationarity) << ','
      << r.active_count << '\n';
  return s.str();
}

inline std::string chi_csv(const PotentialField& f) {
  std::ostringstream s;
  s << "component,x,eta,z,chi\n";
  for (std::size_t c = 0; c < f.components.size(); ++c) {
    const ComponentField& cf = f.components[c];
    const MappedMesh& m = cf.mesh;
    for (int k = 0; k <= m.cells_x(); ++k)
      for (int j = 0; j <= m.cells_eta(); ++j)
        s << c << ',' << fmt(m.x(k)) << ',' << fmt(m.eta(j)) << ',' << fmt(m.z(k, j)) << ',' << fmt(cf.at(k, j))
          << '\n';
  }
  return s.str();
}

struct RunSummary {
  std::string status;
  int exit_code = kOk;
  bool converged = false;
  double E_m = NAN, E_e = NAN, E_total = NAN, E_k = NAN, E_e_at_zero = NAN;
  double min_u = NAN, max_u = NAN, min_gap = NAN, max_gap_defect = NAN, contact_fraction = NAN;
  double stationarity = NAN;
};

struct RunOptions {
  bool verify = false;
  OracleOptions oracle;
};

// Minimizes from the configured initial profile and writes the artifacts under out_dir.
// Config problems surface as ConfigError / InvalidInput before anything is written.
inline RunSummary execute_run(const RunConfig& cfg, const fs::path& out_dir, const RunOptions& ro = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  KEstimate est;
  const DielectricModel model = build_model(cfg, &est);
  const ModelConstants c = build_constants(cfg, model);
  const DeflectionProfile u0 = initial_profile(cfg);
  const MinimizeOptions mo = minimize_options(cfg);
  const AssumptionReport assumptions = validate_assumptions(model, SampleBox{box_top(cfg)});

  RunSummary sum;
  json run;
  run["config"] = to_json(cfg);
  run["constants"] = constants_json(c);
  if (!cfg.dielectric.K) {
    json contrib;
    for (std::size_t i = 0; i < est.contributions.size(); ++i) contrib[KEstimate::kBoundNames[i]] = est.contributions[i];
    run["K_estimate"] = {{"K", est.K}, {"binding", est.binding}, {"contributions", contrib}, {"z_max", box_top(cfg)}};
  }
  run["assumptions"] = {{"ok", assumptions.ok},
                        {"max_residual", assumptions.max_residual},
                        {"worst_x", assumptions.worst_x},
                        {"worst_w", assumptions.worst_w},
                        {"sigma_min", assumptions.sigma_min}};

  const ElectrostaticEnergy ee0 =
      electrostatic_energy(DeflectionProfile::flat(cfg.geometry.L, cfg.geometry.H, cfg.grid.nx, cfg.bc_mode), model,
                           mo.potential);
  sum.E_e_at_zero = ee0.total();
  run["energy_at_zero"] = {{"E_e", ee0.total()}, {"field", ee0.field}, {"robin", ee0.robin}};

  std::optional<MinimizeResult> res;
  try {
    res = minimize(u0, model, c, mo);
  } catch (const SolverError& e) {
    sum.status = std::string("solver failure: ") + e.what();
    sum.exit_code = kRuntimeFailure;
    run["status"] = sum.status;
    run["partial"] = true;
    run["metadata"] = metadata(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    write_atomic(out_dir / cfg.outputs.run_json, run.dump(2) + "\n");
    return sum;
  }

  const MinimizeResult& r = *res;
  const DeflectionProfile& u = r.profile;
  const SupBound sb = sup_bound_check(u, c);
  const double gmin = r.force.min();
  const MaxPrincipleReport mp = max_principle_check(r.field, model, u);
  int contact = 0;
  double min_gap = std::numeric_limits<double>::infinity(), gap_defect = 0;
  for (int i = 0; i <= u.cells(); ++i) {
    contact += r.field.coincidence.contact[i] ? 1 : 0;
    min_gap = std::min(min_gap, u.gap(i));
    gap_defect = std::max(gap_defect, std::abs(u[i] + u.H() - u.gap(i)));
  }
  const double k = r.k;
  double penalty_excess = 0;
  for (double v : u.values()) penalty_excess = std::max(penalty_excess, v - k);

  run["energy"] = energy_json(r.energy);
  run["vi"] = {{"stationarity", r.residual.stationarity},
               {"active_min", finite_or_null(r.residual.active_min)},
               {"active_count", r.residual.active_count},
               {"feasibility", r.residual.feasibility},
               {"tol_stat", mo.tol_stat},
               {"tol_act", mo.tol_act},
               {"roundoff", r.residual.roundoff},
               {"satisfied", r.residual.satisfied(mo.tol_stat, mo.tol_act)},
               {"trace_force", {{"stationarity", r.residual_trace.stationarity},
                                {"active_min", finite_or_null(r.residual_trace.active_min)}}}};
  run["sup_bound"] = {{"max_u", *std::max_element(u.values().begin(), u.values().end())},
                      {"kappa0", c.kappa0},
                      {"margin", sb.margin},
                      {"ok", sb.ok}};
  run["penalty"] = {{"k", k}, {"max_u_minus_k", penalty_excess}, {"inactive", penalty_excess <= 0}};
  run["force"] = {{"min_g", gmin}, {"lower_bound", -c.G0}, {"ok", gmin >= -c.G0}};
  run["max_principle"] = {{"min_psi", finite_or_null(mp.min_psi)},
                          {"max_psi", finite_or_null(mp.max_psi)},
                          {"lower_bound", mp.lower_bound},
                          {"upper_bound", mp.upper_bound},
                          {"ok", !mp.violated}};
  json comps = json::array();
  for (const ComponentField& cf : r.field.components)
    comps.push_back({{"first", cf.mesh.component().first},
                     {"last", cf.mesh.component().last},
                     {"method", cf.stats.method},
                     {"iterations", cf.stats.iterations},
                     {"residual", cf.stats.residual},
                     {"unknowns", cf.stats.unknowns}});
  run["solver"] = {{"iterations", r.iterations},
                   {"status", r.status},
                   {"converged", r.converged},
                   {"nx", cfg.grid.nx},
                   {"neta", cfg.grid.neta},
                   {"potential", {{"chi_sup", r.field.chi_sup()}, {"components", comps}}}};
  run["contact"] = {{"nodes", contact},
                    {"fraction", static_cast<double>(contact) / u.nodes()},
                    {"absorbed", r.field.coincidence.absorbed},
                    {"min_gap", min_gap},
                    {"max_gap_defect", gap_defect}};
  if (!r.audits.empty()) {
    json a = json::array();
    for (const AuditRow& row : r.audits) a.push_back({{"iter", row.iter}, {"fd", row.fd}, {"pairing", row.pairing}});
    run["audits"] = a;
  }

  // Invariants that make the run unusable as a solution.
  std::vector<std::string> failures;
  if (!r.converged) failures.push_back("not converged (" + r.status + ")");
  if (!sb.ok) failures.push_back("sup bound max u <= kappa0 violated");
  if (gmin < -c.G0) failures.push_back("force below -G0");
  if (r.residual.feasibility != 0.0) failures.push_back("obstacle violated");
  if (mp.violated) failures.push_back("maximum principle violated");
  sum.status = failures.empty() ? "ok" : failures.front();
  sum.exit_code = failures.empty() ? kOk : kRuntimeFailure;
  run["status"] = sum.status;
  run["failures"] = failures;
  run["partial"] = !failures.empty();

  sum.converged = r.converged;
  sum.E_m = r.energy.E_m;
  sum.E_e = r.energy.E_e;
  sum.E_total = r.energy.E_total;
  sum.E_k = r.energy.E_k;
  sum.min_u = *std::min_element(u.values().begin(), u.values().end());
  sum.max_u = *std::max_element(u.values().begin(), u.values().end());
  sum.min_gap = min_gap;
  sum.max_gap_defect = gap_defect;
  sum.contact_fraction = static_cast<double>(contact) / u.nodes();
  sum.stationarity = r.residual.stationarity;

  write_atomic(out_dir / cfg.outputs.profile_csv, profile_csv(u, r.force, r.field));
  write_atomic(out_dir / cfg.outputs.history_csv, history_csv(r.history));
  if (cfg.outputs.dump_chi) write_atomic(out_dir / cfg.outputs.chi_csv, chi_csv(r.field));
  if (ro.verify) {
    json v;
    v["oracles"] = oracle_battery(ro.oracle);
    v["run"] = {{"vi_satisfied", run["vi"]["satisfied"]},
                {"sup_bound_ok", sb.ok},
                {"force_lower_bound_ok", gmin >= -c.G0},
                {"max_principle_ok", !mp.violated},
                {"energy_not_above_zero_state", r.energy.E_total <= sum.E_e_at_zero + 1e-12 * std::max(1.0, std::abs(sum.E_e_at_zero))}};
    v["pass"] = v["oracles"]["pass"].get<bool>() && failures.empty();
    v["metadata"] = metadata(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    write_atomic(out_dir / cfg.outputs.verification_json, v.dump(2) + "\n");
    if (!v["pass"].get<bool>() && sum.exit_code == kOk) {
      sum.exit_code = kRuntimeFailure;
      sum.status = "verification failed";
      run["status"] = sum.status;
    }
  }
  run["metadata"] = metadata(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  write_atomic(out_dir / cfg.outputs.run_json, run.dump(2) + "\n");
  return sum;
}

// Oracle battery alone.
inline bool execute_verify(const fs::path& path, const OracleOptions& o = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  json v;
  v["oracles"] = oracle_battery(o);
  v["pass"] = v["oracles"]["pass"];
  v["metadata"] = metadata(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  write_atomic(path, v.dump(2) + "\n");
  return v["pass"].get<bool>();
}

struct SweepEntry {
  double value = 0;
  fs::path dir;
  RunSummary summary;
};

inline std::string sweep_dir_name(std::size_t i) {
  std::ostringstream s;
  s << "entry_" << std::setw(3) << std::setfill('0') << i;
  return s.str();
}

// Runs each sweep value in its own subdirectory; a failing value only marks its own row.
inline std::vector<SweepEntry> execute_sweep(const RunConfig& cfg, const fs::path& out_dir) {
  require(cfg.sweep.has_value(), "config has no sweep block");
  const RunConfig::Sweep& sw = *cfg.sweep;
  json base = to_json(cfg);
  base.erase("sweep");

  std::vector<SweepEntry> entries(sw.values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      SweepEntry& e = entries[i];
      e.value = sw.values[i];
      e.dir = out_dir / sweep_dir_name(i);
      try {
        const RunConfig ci = parse_config(with_override(base, sw.parameter, e.value), cfg.base_dir);
        e.summary = execute_run(ci, e.dir);
      } catch (const ConfigError& ex) {
        e.summary.status = std::string("config error: ") + ex.what();
        e.summary.exit_code = kConfigFailure;
      } catch (const InvalidInput& ex) {
        e.summary.status = std::string("config error: ") + ex.what();
        e.summary.exit_code = kConfigFailure;
      } catch (const std::exception& ex) {
        e.summary.status = std::string("runtime error: ") + ex.what();
        e.summary.exit_code = kRuntimeFailure;
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t nworkers =
      std::min<std::size_t>(entries.size(), sw.workers > 0 ? static_cast<std::size_t>(sw.workers) : hw);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nworkers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  csv << "value,status,E_m,E_e,E_total,E_e_at_zero,min_u,min_gap,max_gap_defect,contact_fraction,stationarity,"
         "converged\n";
  for (const SweepEntry& e : entries) {
    std::string status = e.summary.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    csv << fmt(e.value) << ',' << status << ',' << fmt(e.summary.E_m) << ',' << fmt(e.summary.E_e) << ','
        << fmt(e.summary.E_total) << ',' << fmt(e.summary.E_e_at_zero) << ',' << fmt(e.summary.min_u) << ','
        << fmt(e.summary.min_gap) << ',' << fmt(e.summary.max_gap_defect) << ',' << fmt(e.summary.contact_fraction)
        << ',' << fmt(e.summary.stationarity) << ',' << (e.summary.converged ? 1 : 0) << '\n';
  }
  write_atomic(out_dir / "sweep_summary.csv", csv.str());

  // Monotonicity of min u in the swept parameter, over entries that ran; reported only.
  std::vector<std::pair<double, double>> pts;
  for (const SweepEntry& e : entries)
    if (std::isfinite(e.summary.min_u)) pts.emplace_back(e.value, e.summary.min_u);
  std::sort(pts.begin(), pts.end());
  bool nonincreasing = true;
  for (std::size_t i = 1; i < pts.size(); ++i) nonincreasing = nonincreasing && pts[i].second <= pts[i - 1].second;
  json s;
  s["parameter"] = sw.parameter;
  s["values"] = sw.values;
  s["failed"] = static_cast<int>(std::count_if(entries.begin(), entries.end(),
                                               [](const SweepEntry& e) { return e.summary.exit_code != kOk; }));
  s["min_u_nonincreasing"] = nonincreasing;
  write_atomic(out_dir / "sweep_summary.json", s.dump(2) + "\n");
  return entries;
}

}  // namespace mems::app
