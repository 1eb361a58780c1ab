#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mems/app/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mems;
using namespace mems::app;

namespace {

int config_error(const std::string& msg) {
  std::cerr << "memsctl: config error: " << msg << '\n';
  return kConfigFailure;
}

int runtime_error(const std::string& msg) {
  std::cerr << "memsctl: " << msg << '\n';
  return kRuntimeFailure;
}

// Loads the config and builds the model once, so that bad input maps to exit 2
// before any solve starts.
bool load(const std::string& path, RunConfig& cfg, int& code) {
  try {
    cfg = load_config(path);
    (void)build_constants(cfg, build_model(cfg));
    return true;
  } catch (const ConfigError& e) {
    code = config_error(e.what());
  } catch (const InvalidInput& e) {
    code = config_error(e.what());
  }
  return false;
}

int do_run(const std::string& config, const fs::path& out, bool verify) {
  RunConfig cfg;
  int code = 0;
  if (!load(config, cfg, code)) return code;
  try {
    RunOptions ro;
    ro.verify = verify;
    const RunSummary s = execute_run(cfg, out, ro);
    std::printf("status: %s\nE_total: %.12g  E_m: %.12g  E_e: %.12g\nmin u: %.6g  contact fraction: %.4g  "
                "stationarity: %.3g\n",
                s.status.c_str(), s.E_total, s.E_m, s.E_e, s.min_u, s.contact_fraction, s.stationarity);
    return s.exit_code;
  } catch (const std::exception& e) {
    return runtime_error(e.what());
  }
}

int do_sweep(const std::string& config, const fs::path& out) {
  RunConfig cfg;
  int code = 0;
  if (!load(config, cfg, code)) return code;
  if (!cfg.sweep) return config_error("config has no sweep block");
  try {
    const auto entries = execute_sweep(cfg, out);
    int failed = 0;
    for (const SweepEntry& e : entries) {
      std::printf("%-14.6g %s\n", e.value, e.summary.status.c_str());
      failed += e.summary.exit_code != kOk;
    }
    std::printf("%d of %zu entries failed; summary in %s\n", failed, entries.size(),
                (out / "sweep_summary.csv").string().c_str());
    return failed ? kRuntimeFailure : kOk;
  } catch (const std::exception& e) {
    return runtime_error(e.what());
  }
}

int do_verify(const fs::path& out) {
  try {
    const fs::path p = out / "verification.json";
    const bool ok = execute_verify(p);
    std::printf("oracle battery: %s (%s)\n", ok ? "pass" : "FAIL", p.string().c_str());
    return ok ? kOk : kRuntimeFailure;
  } catch (const std::exception& e) {
    return runtime_error(e.what());
  }
}

int do_kappa0(const std::string& config) {
  RunConfig cfg;
  int code = 0;
  if (!load(config, cfg, code)) return code;
  const DielectricModel m = build_model(cfg);
  std::cout << constants_json(build_constants(cfg, m)).dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electrostatic MEMS obstacle-problem solver"};
  app.require_subcommand(0, 1);
  std::string config;
  std::string out = ".";
  bool verify = false;
  app.add_flag("--verify", verify, "Run the oracle battery (alone, or after a run)");
  app.add_option("--out", out, "Output directory");

  auto* run = app.add_subcommand("run", "Minimize the energy for one configuration");
  run->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory");
  run->add_flag("--verify", verify, "Also write the verification report");

  auto* sweep = app.add_subcommand("sweep", "Run one minimization per value of the sweep block");
  sweep->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "Output directory");

  auto* ver = app.add_subcommand("verify", "Run the oracle battery and write verification.json");
  ver->add_option("--out", out, "Output directory");

  auto* k0 = app.add_subcommand("kappa0", "Print the model constants as JSON");
  k0->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigFailure;
  }

  if (*run) return do_run(config, out, verify);
  if (*sweep) return do_sweep(config, out);
  if (*ver) return do_verify(out);
  if (*k0) return do_kappa0(config);
  if (verify) return do_verify(out);
  std::cout << app.help();
  return kConfigFailure;
}
