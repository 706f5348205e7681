#pragma once

#include <map>
#include <span>

#include "dm/drivers.hpp"
#include "dm/features.hpp"
#include "dm/trajectory.hpp"

namespace dm::train {

enum class OtherVehicleMode {
  Playback,  // uncontrolled vehicles replay their recorded actions
  Rules,     // uncontrolled vehicles are driven online by IDM + MOBIL
};

struct EnvConfig {
  sim::SimConfig sim;
  feat::FeatureConfig features;
  OtherVehicleMode others = OtherVehicleMode::Playback;
  drivers::StyleLibrary styles;  // rules mode controllers
  int rollout_horizon = 200;
};

struct EnvStepResult {
  std::vector<std::vector<double>> observations;  // one per controlled agent
  std::vector<double> applied_accel;              // clamped accelerations
  std::vector<double> d_road;                     // after the step
  std::vector<double> d_c;                        // min body distance
  std::vector<uint8_t> collided;
  bool done = false;
};

/// Single-scene rollout environment: a recorded scene is resumed with a
/// chosen set of policy-controlled vehicles while all others either replay
/// their recording or follow the rule-based controllers.
class DrivingEnv {
 public:
  DrivingEnv(const io::TrajectoryData& source, EnvConfig cfg);

  /// Sample a start scene with `m` controlled vehicles; `sampler` drives the
  /// scene/vehicle selection, `dynamics_seed` seeds the env-internal stream
  /// used by rule-driven vehicles.
  std::vector<std::vector<double>> reset(int m, RngStream& sampler,
                                         uint64_t dynamics_seed);

  /// Deterministic reset at a fixed (episode, start, controlled set).
  std::vector<std::vector<double>> reset_at(int64_t episode, int64_t start,
                                            std::vector<int> controlled,
                                            uint64_t dynamics_seed);

  /// Apply one action per controlled agent (in controlled_ids() order).
  EnvStepResult step(std::span<const sim::Action> actions);

  const sim::Scene& scene() const { return scene_; }
  const std::vector<int>& controlled_ids() const { return controlled_; }
  int64_t episode_index() const { return episode_; }
  int64_t start_step() const { return start_; }
  int steps_taken() const { return steps_; }
  const EnvConfig& config() const { return cfg_; }

  /// Steps this episode can still run (bounded by the recording when others
  /// replay it).
  int steps_available() const;

 private:
  std::vector<std::vector<double>> observe_() const;
  void init_rule_state_();

  const io::TrajectoryData& source_;
  EnvConfig cfg_;
  sim::Scene scene_;
  std::vector<int> controlled_;
  std::map<int, drivers::StyleInstance> rule_state_;
  RngStream dyn_rng_;
  int64_t episode_ = 0;
  int64_t start_ = 0;
  int steps_ = 0;
};

}  // namespace dm::train
