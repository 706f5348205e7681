#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dm/config.hpp"

namespace dm::io {

/// Simulate rule-based experts and write train/validation trajectory files
/// (train.csv, val.csv) under `out_dir`, with style labels when configured.
void cmd_gen_demos(const RunConfig& cfg, const std::filesystem::path& out_dir,
                   uint64_t seed);

inline constexpr const char* kAlgoNames[] = {"bc",   "gail",     "psgail",
                                             "rail", "infogail", "burn",
                                             "sg"};

/// Run one training algorithm against a demonstration file; writes
/// checkpoints, metrics.csv and a manifest under `out_dir`. `resume`
/// continues from the latest saved training state.
void cmd_train(const RunConfig& cfg, const std::string& algorithm,
               const std::filesystem::path& demos_csv,
               const std::filesystem::path& out_dir, uint64_t seed,
               bool resume);

/// Evaluate a checkpoint against a demonstration file: paired rollouts,
/// RMSE curves, event metrics, optional scaling sweep and style accuracy;
/// writes CSVs and SVG plots under `out_dir`.
void cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
              const std::filesystem::path& demos_csv,
              const std::filesystem::path& out_dir, uint64_t seed);

/// Merge evaluation reports from several run directories into side-by-side
/// tables and plots. Missing metrics are skipped with a warning.
void cmd_report(const std::vector<std::filesystem::path>& run_dirs,
                const std::filesystem::path& out_dir);

/// Demo generation core, exposed for tests: one episode of rule-driven
/// traffic starting from a fresh spawn.
TrajectoryEpisode generate_episode(const RunConfig& cfg,
                                   sim::RoadwayPtr roadway, int64_t episode_id,
                                   int steps, RngStream& rng);

}  // namespace dm::io
