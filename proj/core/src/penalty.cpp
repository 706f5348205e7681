#include "dm/penalty.hpp"

#include <algorithm>

namespace dm::train {

double rail_penalty(double d_c, double d_road, double accel,
                    const PenaltyConfig& cfg) {
  const double r = cfg.magnitude;
  double collision = d_c <= 0.0 ? r : 0.0;

  double offroad = 0.0;
  if (cfg.mode == PenaltyConfig::Mode::Binary) {
    offroad = d_road <= cfg.offroad_threshold ? r : 0.0;
  } else {
    // linear from 0 at ramp_start down to R at the threshold
    double span = cfg.offroad_ramp_start - cfg.offroad_threshold;
    double frac = (cfg.offroad_ramp_start - d_road) / span;
    offroad = r * std::clamp(frac, 0.0, 1.0);
  }

  double braking = 0.0;
  if (cfg.mode == PenaltyConfig::Mode::Binary) {
    braking = accel <= cfg.brake_threshold ? r / 2.0 : 0.0;
  } else {
    double span = cfg.brake_ramp_start - cfg.brake_threshold;
    double frac = (cfg.brake_ramp_start - accel) / span;
    braking = (r / 2.0) * std::clamp(frac, 0.0, 1.0);
  }

  return std::max({collision, offroad, braking});
}

int curriculum_agents(const CurriculumSchedule& schedule, int64_t iteration,
                      bool finetune_phase) {
  if (finetune_phase) return schedule.finetune;
  int64_t steps = iteration / schedule.period;
  int64_t m = schedule.initial + schedule.increment * steps;
  return static_cast<int>(
      std::min<int64_t>(m, static_cast<int64_t>(schedule.finetune)));
}

}  // namespace dm::train
