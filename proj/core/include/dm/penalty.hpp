#pragma once

#include <cstdint>

namespace dm::train {

struct PenaltyConfig {
  enum class Mode { Binary, Smooth };

  double magnitude = 1000.0;  // R
  Mode mode = Mode::Binary;
  double offroad_threshold = -0.1;   // d_road at/below this is offroad
  double offroad_ramp_start = 0.5;   // smooth ramp begins here
  double brake_threshold = -3.0;     // accel at/below this is a hard brake
  double brake_ramp_start = -2.0;    // smooth ramp begins here
  double reward_std_multiple = 2.0;  // R maps to this many reward sigmas
};

/// Penalty for one step: collision (d_c = 0) and offroad are worth R, hard
/// braking R/2, combined as the maximum of the triggered terms. Smooth mode
/// ramps the offroad and braking terms linearly from their ramp starts to
/// the binary thresholds; collisions stay binary.
double rail_penalty(double d_c, double d_road, double accel,
                    const PenaltyConfig& cfg);

struct CurriculumSchedule {
  int initial = 10;
  int increment = 10;
  int period = 200;   // iterations between increments
  int finetune = 100; // agent count throughout the fine-tune phase
};

/// Deterministic agent-count curriculum: during phase one the count grows
/// stepwise and saturates at the fine-tune count.
int curriculum_agents(const CurriculumSchedule& schedule, int64_t iteration,
                      bool finetune_phase);

}  // namespace dm::train
