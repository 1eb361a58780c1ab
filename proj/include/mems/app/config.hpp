#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mems/dielectric_model.hpp"
#include "mems/error.hpp"

namespace mems::app {

using json = nlohmann::ordered_json;

struct RunConfig {
  struct Geometry {
    double L = 1.0, H = 1.0;
  } geometry;
  struct Material {
    double beta = 1.0, tau = 0.0, alpha = 0.0;
  } material;
  struct Dielectric {
    std::string family = "example";      // example | tabulated
    double V = 0.1;
    std::vector<double> sigma{1.0};      // polynomial coefficients, ascending; one entry = constant
    std::string sigma_csv;               // tabulated family only
    std::optional<double> K = 1.0;       // empty: estimate over the box
    std::optional<double> z_max;         // estimation box top; default 4 H
  } dielectric;
  struct Grid {
    int nx = 256, neta = 128;
    std::optional<double> gap_threshold;  // default 1e-8 H
  } grid;
  struct Minimize {
    std::optional<double> k;  // empty: auto (kappa0)
    int max_iters = 200;
    double tol_stat = 1e-10, tol_act = 1e-10, tol_energy = 0.0;
    double armijo = 1e-4, backtrack = 0.5;
    int max_backtracks = 30, force_refresh = 1, audit_every = 0;
    double initial_amplitude = 0.0;  // u0 = a (1 - (x/L)^2)^2
  } minimize;
  BcMode bc_mode = BcMode::clamped;
  struct Outputs {
    std::string profile_csv = "profile.csv", run_json = "run.json", history_csv = "history.csv",
                verification_json = "verification.json", chi_csv = "chi.csv";
    bool dump_chi = false;
  } outputs;
  struct Sweep {
    std::string parameter;
    std::vector<double> values;
    int workers = 0;  // 0: hardware concurrency
  };
  std::optional<Sweep> sweep;

  std::filesystem::path base_dir;  // directory of the config file, for relative table paths
};

namespace detail {

inline void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key()))
      throw ConfigError("unknown key '" + (section.empty() ? it.key() : section + "." + it.key()) + "'");
}

inline double num(const json& j, const char* key, const std::string& where, double def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError("'" + where + "." + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError("'" + where + "." + key + "' must be finite");
  return d;
}

inline int integer(const json& j, const char* key, const std::string& where, int def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError("'" + where + "." + key + "' must be an integer");
  return v.get<int>();
}

inline std::string str(const json& j, const char* key, const std::string& where, const std::string& def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError("'" + where + "." + key + "' must be a string");
  return v.get<std::string>();
}

inline void check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace detail

inline void validate(const RunConfig& c) {
  using detail::check;
  check(c.geometry.L > 0, "geometry.L must be positive");
  check(c.geometry.H > 0, "geometry.H must be positive");
  check(c.material.beta > 0, "material.beta must be positive");
  check(c.material.tau >= 0, "material.tau must be non-negative");
  check(c.material.alpha >= 0, "material.alpha must be non-negative");
  check(c.dielectric.family == "example" || c.dielectric.family == "tabulated",
        "dielectric.family must be 'example' or 'tabulated'");
  check(c.dielectric.V >= 0, "dielectric.V must be non-negative");
  if (c.dielectric.family == "example") {
    check(!c.dielectric.sigma.empty(), "dielectric.sigma needs at least one coefficient");
    check(c.dielectric.sigma_csv.empty(), "dielectric.sigma_csv is only valid for the tabulated family");
  } else {
    check(!c.dielectric.sigma_csv.empty(), "tabulated family requires dielectric.sigma_csv");
  }
  if (c.dielectric.K) check(*c.dielectric.K >= 0, "dielectric.K must be non-negative");
  if (c.dielectric.z_max) check(*c.dielectric.z_max > -c.geometry.H, "dielectric.z_max must exceed -H");
  check(c.grid.nx >= 4, "grid.nx must be at least 4");
  check(c.grid.neta >= 2, "grid.neta must be at least 2");
  if (c.grid.gap_threshold) check(*c.grid.gap_threshold >= 0, "grid.gap_threshold must be non-negative");
  if (c.minimize.k) check(*c.minimize.k >= c.geometry.H, "minimize.k must satisfy k >= H");
  check(c.minimize.max_iters >= 0, "minimize.max_iters must be non-negative");
  check(c.minimize.tol_stat > 0 && c.minimize.tol_act >= 0 && c.minimize.tol_energy >= 0,
        "minimize tolerances must be non-negative (tol_stat positive)");
  check(c.minimize.armijo > 0 && c.minimize.armijo < 1, "minimize.armijo must lie in (0, 1)");
  check(c.minimize.backtrack > 0 && c.minimize.backtrack < 1, "minimize.backtrack must lie in (0, 1)");
  check(c.minimize.max_backtracks >= 0, "minimize.max_backtracks must be non-negative");
  check(c.minimize.force_refresh >= 1, "minimize.force_refresh must be at least 1");
  check(c.minimize.audit_every >= 0, "minimize.audit_every must be non-negative");
  check(c.minimize.initial_amplitude >= -c.geometry.H, "minimize.initial_amplitude must be >= -H");
  if (c.sweep) {
    check(!c.sweep->parameter.empty(), "sweep.parameter must name a config key");
    check(!c.sweep->values.empty(), "sweep.values must be non-empty");
    check(c.sweep->workers >= 0, "sweep.workers must be non-negative");
  }
}

inline RunConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  RunConfig c;
  c.base_dir = base_dir;
  check_keys(j, "", {"geometry", "material", "dielectric", "grid", "minimize", "bc_mode", "outputs", "sweep"});
  if (j.contains("geometry")) {
    const json& g = j["geometry"];
    check_keys(g, "geometry", {"L", "H"});
    c.geometry.L = num(g, "L", "geometry", c.geometry.L);
    c.geometry.H = num(g, "H", "geometry", c.geometry.H);
  }
  if (j.contains("material")) {
    const json& m = j["material"];
    check_keys(m, "material", {"beta", "tau", "alpha"});
    c.material.beta = num(m, "beta", "material", c.material.beta);
    c.material.tau = num(m, "tau", "material", c.material.tau);
    c.material.alpha = num(m, "alpha", "material", c.material.alpha);
  }
  if (j.contains("dielectric")) {
    const json& d = j["dielectric"];
    check_keys(d, "dielectric", {"family", "V", "sigma", "sigma_csv", "K", "z_max"});
    c.dielectric.family = str(d, "family", "dielectric", c.dielectric.family);
    c.dielectric.V = num(d, "V", "dielectric", c.dielectric.V);
    if (d.contains("sigma")) {
      const json& s = d["sigma"];
      if (s.is_number()) {
        c.dielectric.sigma = {s.get<double>()};
      } else if (s.is_array() && !s.empty()) {
        c.dielectric.sigma.clear();
        for (const json& e : s) {
          if (!e.is_number()) throw ConfigError("'dielectric.sigma' coefficients must be numbers");
          c.dielectric.sigma.push_back(e.get<double>());
        }
      } else {
        throw ConfigError("'dielectric.sigma' must be a number or a non-empty array of coefficients");
      }
      if (c.dielectric.family == "tabulated") throw ConfigError("'dielectric.sigma' is not used by the tabulated family");
    }
    c.dielectric.sigma_csv = str(d, "sigma_csv", "dielectric", "");
    if (d.contains("K")) {
      const json& k = d["K"];
      if (k.is_string() && k.get<std::string>() == "estimate") {
        c.dielectric.K.reset();
      } else if (k.is_number()) {
        c.dielectric.K = k.get<double>();
      } else {
        throw ConfigError("'dielectric.K' must be a number or \"estimate\"");
      }
    }
    if (d.contains("z_max")) c.dielectric.z_max = num(d, "z_max", "dielectric", 0.0);
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, "grid", {"nx", "neta", "gap_threshold"});
    c.grid.nx = integer(g, "nx", "grid", c.grid.nx);
    c.grid.neta = integer(g, "neta", "grid", c.grid.neta);
    if (g.contains("gap_threshold")) c.grid.gap_threshold = num(g, "gap_threshold", "grid", 0.0);
  }
  if (j.contains("minimize")) {
    const json& m = j["minimize"];
    check_keys(m, "minimize", {"k", "max_iters", "tol_stat", "tol_act", "tol_energy", "armijo", "backtrack",
                               "max_backtracks", "force_refresh", "audit_every", "initial_amplitude"});
    if (m.contains("k")) {
      const json& k = m["k"];
      if (k.is_string() && k.get<std::string>() == "auto") {
        c.minimize.k.reset();
      } else if (k.is_number()) {
        c.minimize.k = k.get<double>();
      } else {
        throw ConfigError("'minimize.k' must be a number or \"auto\"");
      }
    }
    auto& mm = c.minimize;
    mm.max_iters = integer(m, "max_iters", "minimize", mm.max_iters);
    mm.tol_stat = num(m, "tol_stat", "minimize", mm.tol_stat);
    mm.tol_act = num(m, "tol_act", "minimize", mm.tol_act);
    mm.tol_energy = num(m, "tol_energy", "minimize", mm.tol_energy);
    mm.armijo = num(m, "armijo", "minimize", mm.armijo);
    mm.backtrack = num(m, "backtrack", "minimize", mm.backtrack);
    mm.max_backtracks = integer(m, "max_backtracks", "minimize", mm.max_backtracks);
    mm.force_refresh = integer(m, "force_refresh", "minimize", mm.force_refresh);
    mm.audit_every = integer(m, "audit_every", "minimize", mm.audit_every);
    mm.initial_amplitude = num(m, "initial_amplitude", "minimize", mm.initial_amplitude);
  }
  if (j.contains("bc_mode")) {
    const std::string s = str(j, "bc_mode", "", "clamped");
    try {
      c.bc_mode = bc_mode_from_string(s);
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("outputs")) {
    const json& o = j["outputs"];
    check_keys(o, "outputs", {"profile_csv", "run_json", "history_csv", "verification_json", "chi_csv", "dump_chi"});
    auto& oo = c.outputs;
    oo.profile_csv = str(o, "profile_csv", "outputs", oo.profile_csv);
    oo.run_json = str(o, "run_json", "outputs", oo.run_json);
    oo.history_csv = str(o, "history_csv", "outputs", oo.history_csv);
    oo.verification_json = str(o, "verification_json", "outputs", oo.verification_json);
    oo.chi_csv = str(o, "chi_csv", "outputs", oo.chi_csv);
    if (o.contains("dump_chi")) {
      if (!o["dump_chi"].is_boolean()) throw ConfigError("'outputs.dump_chi' must be a boolean");
      oo.dump_chi = o["dump_chi"].get<bool>();
    }
  }
  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    check_keys(s, "sweep", {"parameter", "values", "workers"});
    RunConfig::Sweep sw;
    sw.parameter = str(s, "parameter", "sweep", "");
    if (!s.contains("values") || !s["values"].is_array()) throw ConfigError("'sweep.values' must be an array");
    for (const json& v : s["values"]) {
      if (!v.is_number()) throw ConfigError("'sweep.values' entries must be numbers");
      sw.values.push_back(v.get<double>());
    }
    sw.workers = integer(s, "workers", "sweep", 0);
    c.sweep = sw;
  }
  validate(c);
  return c;
}

inline json to_json(const RunConfig& c) {
  json j;
  j["geometry"] = {{"L", c.geometry.L}, {"H", c.geometry.H}};
  j["material"] = {{"beta", c.material.beta}, {"tau", c.material.tau}, {"alpha", c.material.alpha}};
  json d;
  d["family"] = c.dielectric.family;
  d["V"] = c.dielectric.V;
  if (c.dielectric.family == "example") d["sigma"] = c.dielectric.sigma;
  if (!c.dielectric.sigma_csv.empty()) d["sigma_csv"] = c.dielectric.sigma_csv;
  d["K"] = c.dielectric.K ? json(*c.dielectric.K) : json("estimate");
  if (c.dielectric.z_max) d["z_max"] = *c.dielectric.z_max;
  j["dielectric"] = d;
  json g = {{"nx", c.grid.nx}, {"neta", c.grid.neta}};
  if (c.grid.gap_threshold) g["gap_threshold"] = *c.grid.gap_threshold;
  j["grid"] = g;
  const auto& m = c.minimize;
  j["minimize"] = {{"k", m.k ? json(*m.k) : json("auto")},
                   {"max_iters", m.max_iters},
                   {"tol_stat", m.tol_stat},
                   {"tol_act", m.tol_act},
                   {"tol_energy", m.tol_energy},
                   {"armijo", m.armijo},
                   {"backtrack", m.backtrack},
                   {"max_backtracks", m.max_backtracks},
                   {"force_refresh", m.force_refresh},
                   {"audit_every", m.audit_every},
                   {"initial_amplitude", m.initial_amplitude}};
  j["bc_mode"] = to_string(c.bc_mode);
  const auto& o = c.outputs;
  j["outputs"] = {{"profile_csv", o.profile_csv},
                  {"run_json", o.run_json},
                  {"history_csv", o.history_csv},
                  {"verification_json", o.verification_json},
                  {"chi_csv", o.chi_csv},
                  {"dump_chi", o.dump_chi}};
  if (c.sweep) j["sweep"] = {{"parameter", c.sweep->parameter}, {"values", c.sweep->values}, {"workers", c.sweep->workers}};
  return j;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j, path.parent_path());
}

// Replaces the value at a dotted key path, e.g. "dielectric.V".
inline json with_override(json j, const std::string& dotted, double value) {
  json* node = &j;
  std::stringstream ss(dotted);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty sweep parameter");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("sweep parameter '" + dotted + "' does not name a config key");
    node = &(*node)[parts[i]];
  }
  static const std::set<std::string> kIntegral = {"nx", "neta", "max_iters", "max_backtracks", "force_refresh",
                                                  "audit_every"};
  if (kIntegral.count(parts.back())) {
    if (value != std::floor(value)) throw ConfigError("sweep value for '" + dotted + "' must be an integer");
    (*node)[parts.back()] = static_cast<long>(value);
  } else {
    (*node)[parts.back()] = value;
  }
  return j;
}

}  // namespace mems::app
