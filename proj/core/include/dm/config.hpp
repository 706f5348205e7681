#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "dm/critic.hpp"
#include "dm/drivers.hpp"
#include "dm/eval.hpp"
#include "dm/features.hpp"
#include "dm/policy.hpp"
#include "dm/trainer.hpp"

namespace dm::io {

struct RoadwaySection {
  std::string kind = "straight";  // "straight" | "oval"
  double length = 640.0;          // straight spawn length
  double straight_length = 150.0; // oval straights
  double curve_radius = 50.0;
  int lane_count = 5;
  double lane_width = 3.6;
  sim::SimConfig sim;  // dt, horizon, action bounds

  sim::RoadwayPtr build() const;
};

struct StylesSection {
  drivers::StyleLibrary library = drivers::StyleLibrary::defaults();
  std::array<double, drivers::kStyleCount> mix = {0.25, 0.25, 0.25, 0.25};
};

struct TrainerSection {
  train::TrainPhases phases;
  train::CurriculumSchedule curriculum;
  train::PenaltyConfig penalty;
  train::InfoGailConfig info;
  train::BcConfig bc;
  int checkpoint_period = 50;
  std::string env_others = "playback";  // "playback" | "rules"
  int rollout_horizon = 200;
  int64_t norm_sample = 20000;
};

struct DemosSection {
  int episodes = 960;
  int val_episodes = 480;
  int steps = 50;
  int val_steps = 50;
  int vehicles = 12;
  int warmup_steps = 20;
  bool styled = true;  // draw per-vehicle styles from the mix and label rows
};

struct TrpoSection {
  trpo::TrpoConfig trpo;
  trpo::ValueFitConfig vf_fit;
};

/// Typed view of the run-configuration file. Parsing rejects unknown keys;
/// serialize/parse round-trips exactly.
struct RunConfig {
  RoadwaySection roadway;
  StylesSection styles;
  feat::FeatureConfig features;
  policy::PolicyArch policy;
  TrpoSection trpo;
  critic::CriticConfig critic;
  TrainerSection trainer;
  eval::EvalConfig eval;
  DemosSection demos;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  static RunConfig load_file(const std::filesystem::path& path);
  void save_file(const std::filesystem::path& path) const;

  uint64_t hash() const;

  train::EnvConfig env_config() const;
};

}  // namespace dm::io
