#pragma once

#include <filesystem>
#include <variant>

#include "dm/env.hpp"
#include "dm/info_gail.hpp"
#include "dm/policy.hpp"

namespace dm::eval {

struct EvalConfig {
  int horizon = 200;      // steps (20 s at 10 Hz; 300 for 30 s style runs)
  int n_rollouts = 100;
  int controlled = 1;
  std::vector<int> agent_counts = {1, 10, 20, 40};  // scaling study sweep
  int burn_in = 0;             // start rollouts at this demo offset
  bool z_from_encoder = false; // burn-in style inference (argmax posterior)
  uint64_t master_seed = 0;
};

/// Paired truth/policy trace for one controlled agent over one rollout.
/// Index h holds the states h+1 steps after the shared start scene.
struct AgentTrace {
  int rollout = 0;
  int agent_id = 0;
  int latent = -1;
  std::vector<double> truth_x, truth_y, truth_v, truth_t;
  std::vector<double> pol_x, pol_y, pol_v, pol_t;
  std::vector<double> d_road, applied_accel;
  std::vector<uint8_t> collided;
};

struct RolloutSet {
  int horizon = 0;
  double dt = 0.1;
  std::vector<AgentTrace> traces;
};

using PolicyVariant = std::variant<const policy::GaussianPolicy*,
                                   const drivers::StaticGaussianModel*>;

/// Replacement evaluation: controlled vehicles run the policy while every
/// other vehicle replays its recording (or follows the rules, per config);
/// the recorded trajectories of the controlled vehicles are the ground
/// truth. Deterministic given the config seed.
RolloutSet rollout_eval(PolicyVariant policy, const io::TrajectoryData& source,
                        const train::EnvConfig& env_cfg, const EvalConfig& cfg,
                        const train::QNetwork* encoder = nullptr);

struct RmseCurves {
  std::vector<double> position;     // meters, Euclidean, per horizon step
  std::vector<double> speed;        // m/s
  std::vector<double> lane_offset;  // meters (signed t coordinate)
};

RmseCurves rmse_curves(const RolloutSet& rollouts);

struct EventMetrics {
  double collision_rate = 0;      // per controlled vehicle-episode
  double offroad_duration = 0;    // mean seconds per episode at d_road <= -0.1
  double hard_brake_rate = 0;     // fraction of steps with accel <= -3
};

EventMetrics undesirable_rates(const RolloutSet& rollouts);

struct ScalingRow {
  int agent_count = 0;
  double mean_position_rmse = 0;  // averaged over horizon steps
};

/// Average position RMSE as a function of the controlled-agent count.
std::vector<ScalingRow> scaling_study(PolicyVariant policy,
                                      const io::TrajectoryData& source,
                                      const train::EnvConfig& env_cfg,
                                      const EvalConfig& cfg);

struct StyleAccuracy {
  double accuracy = 0;
  double ci_low = 0;   // 95% binomial (normal approximation)
  double ci_high = 0;
  int64_t count = 0;
};

/// Argmax-posterior style classification accuracy over labeled segments.
StyleAccuracy style_accuracy(const train::QNetwork& encoder,
                             const io::ExpertDataset& dataset,
                             int segment_len);

void write_rollouts_csv(const std::filesystem::path& path,
                        const RolloutSet& rollouts);
RolloutSet read_rollouts_csv(const std::filesystem::path& path);

}  // namespace dm::eval
