#include "dm/env.hpp"

#include <algorithm>

namespace dm::train {

DrivingEnv::DrivingEnv(const io::TrajectoryData& source, EnvConfig cfg)
    : source_(source), cfg_(std::move(cfg)) {}

std::vector<std::vector<double>> DrivingEnv::reset(int m, RngStream& sampler,
                                                   uint64_t dynamics_seed) {
  int64_t min_remaining = cfg_.others == OtherVehicleMode::Playback
                              ? cfg_.rollout_horizon + 1
                              : 1;
  sim::SampledScene sampled =
      sim::sample_initial_scene(source_, m, min_remaining, sampler);
  return reset_at(sampled.episode, sampled.start_step,
                  std::move(sampled.controlled_ids), dynamics_seed);
}

std::vector<std::vector<double>> DrivingEnv::reset_at(
    int64_t episode, int64_t start, std::vector<int> controlled,
    uint64_t dynamics_seed) {
  episode_ = episode;
  start_ = start;
  steps_ = 0;
  controlled_ = std::move(controlled);
  scene_ = source_.scene_at(episode, start);
  dyn_rng_ = RngStream(dynamics_seed);
  rule_state_.clear();
  if (cfg_.others == OtherVehicleMode::Rules) init_rule_state_();
  return observe_();
}

void DrivingEnv::init_rule_state_() {
  // Deterministic order: scene vehicle order.
  for (const auto& v : scene_.vehicles) {
    if (std::find(controlled_.begin(), controlled_.end(), v.id) !=
        controlled_.end())
      continue;
    auto style = source_.style_of(episode_, v.id);
    drivers::StyleClass cls =
        style ? *style
              : static_cast<drivers::StyleClass>(
                    dyn_rng_.uniform_int(0, drivers::kStyleCount - 1));
    rule_state_.emplace(
        v.id, drivers::spawn_style(cfg_.styles, cls, v.lane_pos.lane, dyn_rng_));
  }
}

int DrivingEnv::steps_available() const {
  int by_horizon = cfg_.rollout_horizon - steps_;
  if (cfg_.others == OtherVehicleMode::Playback) {
    int64_t recorded =
        source_.episode_length(episode_) - 1 - (start_ + steps_);
    return static_cast<int>(
        std::max<int64_t>(0, std::min<int64_t>(by_horizon, recorded)));
  }
  return std::max(0, by_horizon);
}

EnvStepResult DrivingEnv::step(std::span<const sim::Action> actions) {
  if (actions.size() != controlled_.size())
    throw MissingAction("one action per controlled agent required");
  if (steps_available() <= 0)
    throw EpisodeTooShort("episode already finished");

  std::map<int, sim::Action> all_actions;
  for (size_t i = 0; i < controlled_.size(); ++i)
    all_actions[controlled_[i]] = actions[i];

  int64_t now = start_ + steps_;
  for (const auto& v : scene_.vehicles) {
    if (all_actions.count(v.id)) continue;
    if (cfg_.others == OtherVehicleMode::Playback) {
      all_actions[v.id] = source_.action_at(episode_, now, v.id);
    } else {
      all_actions[v.id] = drivers::rule_policy_action(
          scene_, v.id, rule_state_.at(v.id), cfg_.sim.dt,
          cfg_.sim.turn_rate_bound, dyn_rng_);
    }
  }

  scene_ = sim::step_scene(scene_, all_actions, cfg_.sim);
  ++steps_;

  EnvStepResult out;
  out.observations = observe_();
  auto collisions = sim::detect_collisions(scene_);
  out.applied_accel.reserve(controlled_.size());
  for (size_t i = 0; i < controlled_.size(); ++i) {
    int id = controlled_[i];
    sim::Action applied = sim::clamp_action(all_actions.at(id), cfg_.sim);
    out.applied_accel.push_back(applied.accel);
    const auto& state = scene_.require(id);
    out.d_road.push_back(sim::distance_to_road_edge(state, *scene_.roadway));
    out.d_c.push_back(sim::min_body_distance(scene_, id));
    bool hit = false;
    for (const auto& [a, b] : collisions)
      if (a == id || b == id) hit = true;
    out.collided.push_back(hit ? 1 : 0);
  }
  out.done = steps_available() <= 0;
  return out;
}

std::vector<std::vector<double>> DrivingEnv::observe_() const {
  std::vector<std::vector<double>> obs;
  obs.reserve(controlled_.size());
  for (int id : controlled_)
    obs.push_back(feat::extract_observation(scene_, id, cfg_.features));
  return obs;
}

}  // namespace dm::train
