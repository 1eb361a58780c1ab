#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mems/app/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mems;
using namespace mems::app;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mems_app_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json small_config() {
  return json::parse(R"({
    "geometry": {"L": 1.0, "H": 1.0},
    "material": {"beta": 1.0, "tau": 0.0, "alpha": 0.0},
    "dielectric": {"family": "example", "V": 0.1, "sigma": 1.0, "K": 1.0},
    "grid": {"nx": 64, "neta": 32},
    "minimize": {"k": "auto"},
    "bc_mode": "clamped"
  })");
}

fs::path write_json(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

int memsctl(const std::string& args) {
  const std::string cmd = std::string(MEMSCTL_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Config, RoundTrip) {
  const RunConfig a = parse_config(small_config());
  const RunConfig b = parse_config(to_json(a));
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(b.grid.nx, 64);
  EXPECT_FALSE(b.minimize.k.has_value());
}

TEST(Config, RejectsUnknownKey) {
  json j = small_config();
  j["grid"]["nz"] = 10;
  EXPECT_THROW(parse_config(j), ConfigError);
  json k = small_config();
  k["extra"] = 1;
  EXPECT_THROW(parse_config(k), ConfigError);
}

TEST(Config, RejectsNonPositiveBeta) {
  json j = small_config();
  j["material"]["beta"] = 0.0;
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, OverrideKeepsIntegralKeysIntegral) {
  const json j = with_override(small_config(), "grid.nx", 32);
  EXPECT_TRUE(j["grid"]["nx"].is_number_integer());
  EXPECT_EQ(parse_config(j).grid.nx, 32);
  EXPECT_THROW(with_override(small_config(), "grid.nx", 32.5), ConfigError);
  EXPECT_EQ(parse_config(with_override(small_config(), "dielectric.V", 0.3)).dielectric.V, 0.3);
}

TEST(Cli, ConfigErrorExitsWithTwo) {
  const fs::path d = scratch("beta0");
  json j = small_config();
  j["material"]["beta"] = 0.0;
  EXPECT_EQ(memsctl("run --config " + write_json(d, j).string() + " --out " + d.string()), 2);
  EXPECT_EQ(memsctl("run --config " + (d / "missing.json").string()), 2);
  EXPECT_EQ(memsctl("bogus"), 2);
}

TEST(Cli, RunWritesArtifacts) {
  const fs::path d = scratch("run");
  ASSERT_EQ(memsctl("run --config " + write_json(d, small_config()).string() + " --out " + d.string()), 0);
  const json r = read_json(d / "run.json");
  EXPECT_EQ(r["status"], "ok");
  EXPECT_FALSE(r["partial"].get<bool>());
  EXPECT_LE(r["vi"]["stationarity"].get<double>(), 1e-8);
  EXPECT_TRUE(fs::exists(d / "profile.csv"));
  EXPECT_TRUE(fs::exists(d / "history.csv"));
  EXPECT_EQ(slurp(d / "profile.csv").rfind("x,u,g,contact", 0), 0u);
}

TEST(Cli, VerifyWritesReport) {
  const fs::path d = scratch("verify");
  ASSERT_EQ(memsctl("verify --out " + d.string()), 0);
  const json v = read_json(d / "verification.json");
  EXPECT_TRUE(v["pass"].get<bool>());
}

TEST(Pipeline, DeterministicApartFromMetadata) {
  const RunConfig cfg = parse_config(small_config());
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  execute_run(cfg, a);
  execute_run(cfg, b);
  json ja = read_json(a / "run.json"), jb = read_json(b / "run.json");
  ja.erase("metadata");
  jb.erase("metadata");
  EXPECT_EQ(ja.dump(), jb.dump());
  EXPECT_EQ(slurp(a / "profile.csv"), slurp(b / "profile.csv"));
  EXPECT_EQ(slurp(a / "history.csv"), slurp(b / "history.csv"));
}

TEST(Pipeline, SweepOverVoltage) {
  json j = small_config();
  j["sweep"] = {{"parameter", "dielectric.V"}, {"values", {0.0, 0.1, 0.2}}, {"workers", 2}};
  const fs::path d = scratch("sweep");
  const auto entries = execute_sweep(parse_config(j), d);
  ASSERT_EQ(entries.size(), 3u);
  for (const SweepEntry& e : entries) EXPECT_EQ(e.summary.exit_code, kOk) << e.value;
  EXPECT_EQ(entries[0].summary.E_e, 0.0);
  EXPECT_NEAR(entries[2].summary.E_e_at_zero / entries[1].summary.E_e_at_zero, 4.0, 1e-12);
  EXPECT_LE(entries[2].summary.min_u, entries[1].summary.min_u);
  EXPECT_TRUE(fs::exists(d / "sweep_summary.csv"));
  EXPECT_TRUE(read_json(d / "sweep_summary.json")["min_u_nonincreasing"].get<bool>());
}

TEST(Pipeline, FailedSweepEntryIsIsolated) {
  json j = small_config();
  j["sweep"] = {{"parameter", "material.beta"}, {"values", {1.0, -1.0}}, {"workers", 1}};
  const auto entries = execute_sweep(parse_config(j), scratch("sweep_fail"));
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].summary.exit_code, kOk);
  EXPECT_EQ(entries[1].summary.exit_code, kConfigFailure);
}
