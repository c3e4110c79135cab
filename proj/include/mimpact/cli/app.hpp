#pragma once

// Entry point shared by the `mimpact` executable and the tests.
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "mimpact/cli/commands.hpp"
#include "mimpact/cli/config.hpp"
#include "mimpact/cli/manifest.hpp"
#include "mimpact/cli/sweep.hpp"

namespace mimpact::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::size_t workers = 1;
  bool quiet = false;
};

inline void execute(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t workers, const OutputDir& out) {
  std::visit(
      [&](const auto& block) {
        using B = std::decay_t<decltype(block)>;
        if constexpr (std::is_same_v<B, IngestConfig>) run_ingest(block, seed, out);
        else if constexpr (std::is_same_v<B, CalibrateConfig>) run_calibrate(block, seed, out);
        else if constexpr (std::is_same_v<B, TrajectoryConfig>) run_trajectory(block, seed, out);
        else if constexpr (std::is_same_v<B, ContinuousConfig>) run_continuous(block, out);
        else if constexpr (std::is_same_v<B, DiscreteConfig>) run_discrete(block, seed, workers, out);
        else if constexpr (std::is_same_v<B, DiffusivityConfig>) run_diffusivity(block, seed, out);
        else out.write("sweep.csv", sweep_csv(block, run_sweep_cells(block, seed, workers, cfg.base_dir)));
      },
      cfg.block);
}

/// Runs a parsed configuration; diagnostics go to `err`.
inline int run(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& err) {
  const std::uint64_t seed = opts.seed.value_or(cfg.seed);
  const fs::path dir = opts.out.value_or(cfg.output_dir);
  try {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("output_dir", "cannot create directory " + dir.string());
    const OutputDir out(dir);
    try {
      out.write(kManifestName, "");
    } catch (const std::exception&) {
      throw ConfigError("output_dir", "directory " + dir.string() + " is not writable");
    }
    if (!opts.quiet) err << "mimpact: running " << cfg.command << " (seed " << seed << ") into " << dir.string() << "\n";
    execute(cfg, seed, opts.workers, out);
    write_manifest(dir);
    if (!opts.quiet) err << "mimpact: done\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "mimpact: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ModuleError& e) {
    err << "mimpact: error in " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "mimpact: error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

inline int main_entry(int argc, char** argv, std::ostream& err = std::cerr) {
  CLI::App app{"Market impact modelling experiments"};
  std::string config_path;
  RunOptions opts;
  std::uint64_t seed = 0;
  std::string out_dir;
  app.add_option("--config", config_path, "Experiment configuration (JSON)")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Override the configured master seed");
  auto* out_opt = app.add_option("--out", out_dir, "Override the configured output directory");
  app.add_option("--workers", opts.workers, "Worker threads for sweeps and Monte Carlo")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", opts.quiet, "Suppress progress messages");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  if (*seed_opt) opts.seed = seed;
  if (*out_opt) opts.out = fs::path(out_dir);

  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "mimpact: config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return run(cfg, opts, err);
}

}  // namespace mimpact::cli
