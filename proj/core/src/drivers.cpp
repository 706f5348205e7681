#include "dm/drivers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dm::drivers {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double desired_gap(double v, double r, const IdmParams& p) {
  double d = p.d_min + p.time_headway * v -
             v * r / (2.0 * std::sqrt(p.a_max * p.b_pref));
  return std::max(d, p.d_min);
}

double idm_accel(double v, double r, double d, const IdmParams& p,
                 double b_hard) {
  double gap_term = 0.0;
  if (std::isfinite(d)) {
    if (d <= 0.0)
      throw NonPositiveGap("idm_accel: leader present at non-positive gap");
    double d_des = desired_gap(v, r, p);
    gap_term = (d_des / d) * (d_des / d);
  }
  double free_term = std::pow(v / p.v_des, 4.0);
  double a = p.a_max * (1.0 - free_term - gap_term);
  return std::clamp(a, -b_hard, p.a_max);
}

namespace {

// IDM acceleration of `follower` when chasing `leader` (or free road).
double follow_accel(const sim::VehicleState& follower,
                    const std::optional<sim::LeaderInfo>& leader,
                    const IdmParams& idm) {
  if (!leader) return idm_accel(follower.speed, 0.0, kInf, idm);
  if (leader->gap <= 0.0) return -9.0;  // overlapping; treat as hard brake
  return idm_accel(follower.speed, leader->closing_speed, leader->gap, idm);
}

// Gap and closing speed between an explicit pair projected onto `lane`.
std::optional<sim::LeaderInfo> pair_gap(const sim::Scene& scene, int rear_id,
                                        int front_id, int lane) {
  const auto& rear = scene.require(rear_id);
  const auto& front = scene.require(front_id);
  const auto& road = *scene.roadway;
  double centers =
      road.forward_gap(lane, road.project_to_lane(rear.pose, lane).s,
                       road.project_to_lane(front.pose, lane).s);
  if (centers <= 0.0) return std::nullopt;
  sim::LeaderInfo info;
  info.id = front_id;
  info.gap =
      std::max(0.0, centers - (rear.shape.length + front.shape.length) / 2.0);
  info.closing_speed = front.speed - rear.speed;
  return info;
}

}  // namespace

int mobil_decide_lane(const sim::Scene& scene, int ego_id,
                      const MobilParams& mp, const IdmParams& idm) {
  const auto& ego = scene.require(ego_id);
  const auto& road = *scene.roadway;
  int current = ego.lane_pos.lane;

  auto ego_accel_in = [&](int lane) {
    return follow_accel(ego, sim::leader_lookup(scene, ego_id, lane),
                        idm);
  };
  double a_ego_before = ego_accel_in(current);

  // Old follower's change when the ego leaves its lane.
  double delta_old_follower = 0.0;
  if (auto of = sim::follower_lookup(scene, ego_id, current)) {
    const auto& foll = scene.require(of->id);
    double before = follow_accel(foll, pair_gap(scene, of->id, ego_id,
                                                       current), idm);
    std::optional<sim::LeaderInfo> next_leader;
    if (auto lead = sim::leader_lookup(scene, ego_id, current))
      next_leader = pair_gap(scene, of->id, lead->id, current);
    double after = follow_accel(foll, next_leader, idm);
    delta_old_follower = after - before;
  }

  int best_lane = current;
  double best_gain = mp.accel_gain_threshold;
  for (int cand : {current - 1, current + 1}) {
    if (cand < 0 || cand >= road.lane_count()) continue;

    double a_ego_after =
        follow_accel(ego, sim::leader_lookup(scene, ego_id, cand), idm);

    double delta_new_follower = 0.0;
    bool safe = true;
    if (auto nf = sim::follower_lookup(scene, ego_id, cand)) {
      const auto& foll = scene.require(nf->id);
      auto gap_to_ego = pair_gap(scene, nf->id, ego_id, cand);
      double after;
      if (!gap_to_ego || gap_to_ego->gap <= 0.0) {
        after = -kInf;  // ego would drop on top of the follower
      } else {
        after = follow_accel(foll, gap_to_ego, idm);
      }
      if (after < -mp.b_safe) safe = false;
      double before = follow_accel(foll, sim::leader_lookup(scene, nf->id, cand), idm);
      delta_new_follower = after - before;
    }
    if (!safe) continue;

    double gain = (a_ego_after - a_ego_before) +
                  mp.politeness * (delta_new_follower + delta_old_follower);
    if (gain > best_gain) {
      best_gain = gain;
      best_lane = cand;
    }
  }
  return best_lane;
}

double lane_track_turnrate(const sim::VehicleState& state, int target_lane,
                           const LaneTrackerParams& p,
                           const sim::RoadwayGeometry& roadway,
                           double turn_rate_bound) {
  sim::LanePosition lp = roadway.project_to_lane(state.pose, target_lane);
  double omega = -p.k_offset * lp.t - p.k_heading * lp.phi;
  return std::clamp(omega, -turn_rate_bound, turn_rate_bound);
}

const char* style_name(StyleClass s) {
  switch (s) {
    case StyleClass::Aggressive: return "aggressive";
    case StyleClass::Passive: return "passive";
    case StyleClass::Speeder: return "speeder";
    case StyleClass::Tailgater: return "tailgater";
  }
  return "unknown";
}

std::optional<StyleClass> style_from_name(const std::string& name) {
  for (int i = 0; i < kStyleCount; ++i) {
    if (name == style_name(static_cast<StyleClass>(i)))
      return static_cast<StyleClass>(i);
  }
  return std::nullopt;
}

StyleLibrary StyleLibrary::defaults() {
  StyleLibrary lib;
  auto& agg = lib.classes[static_cast<size_t>(StyleClass::Aggressive)];
  agg.idm = {35.0, 1.0, 0.5, 3.0, 3.0};
  agg.v_des_mean = 35.0;
  agg.v_des_std = 2.0;

  auto& pas = lib.classes[static_cast<size_t>(StyleClass::Passive)];
  pas.idm = {25.0, 4.0, 2.0, 1.0, 1.5};
  pas.v_des_mean = 25.0;
  pas.v_des_std = 2.0;

  auto& spd = lib.classes[static_cast<size_t>(StyleClass::Speeder)];
  spd.idm = {35.0, 4.0, 2.0, 3.0, 2.0};
  spd.v_des_mean = 35.0;
  spd.v_des_std = 2.0;

  auto& tlg = lib.classes[static_cast<size_t>(StyleClass::Tailgater)];
  tlg.idm = {25.0, 1.0, 0.5, 1.0, 1.5};
  tlg.v_des_mean = 25.0;
  tlg.v_des_std = 2.0;
  return lib;
}

StyleInstance spawn_style(const StyleLibrary& lib, StyleClass style,
                          int initial_lane, RngStream& rng) {
  const StylePrior& prior = lib.classes[static_cast<size_t>(style)];
  StyleInstance inst;
  inst.style = style;
  inst.idm = prior.idm;
  inst.idm.v_des = std::max(1.0, rng.normal(prior.v_des_mean, prior.v_des_std));
  inst.mobil = prior.mobil;
  inst.noise = lib.noise;
  inst.tracker = lib.tracker;
  inst.lane_change_cooldown = lib.lane_change_cooldown;
  inst.target_lane = initial_lane;
  return inst;
}

sim::Action rule_policy_action(const sim::Scene& scene, int ego_id,
                               StyleInstance& inst, double dt,
                               double turn_rate_bound, RngStream& rng) {
  const auto& ego = scene.require(ego_id);
  auto leader = sim::leader_lookup(scene, ego_id, ego.lane_pos.lane);

  double accel;
  if (leader && leader->gap <= 0.0) {
    accel = -9.0;  // body overlap, hard brake
  } else {
    accel = idm_accel(ego.speed, leader ? leader->closing_speed : 0.0,
                      leader ? leader->gap : kInf, inst.idm);
  }

  if (inst.cooldown_left <= 0.0) {
    int decided = mobil_decide_lane(scene, ego_id, inst.mobil, inst.idm);
    if (decided != inst.target_lane) {
      inst.target_lane = decided;
      inst.cooldown_left = inst.lane_change_cooldown;
    }
  } else {
    inst.cooldown_left -= dt;
  }

  double omega = lane_track_turnrate(ego, inst.target_lane, inst.tracker,
                                     *scene.roadway, turn_rate_bound);

  sim::Action a;
  a.accel = accel + inst.noise.sigma_accel * rng.normal();
  a.turn_rate = omega + inst.noise.sigma_turn * rng.normal();
  return a;
}

StaticGaussianModel fit_static_gaussian(
    std::span<const Eigen::Vector2d> actions) {
  if (actions.size() < 3)
    throw InsufficientData("fit_static_gaussian needs at least 3 samples");
  StaticGaussianModel m;
  m.mu.setZero();
  for (const auto& a : actions) m.mu += a;
  m.mu /= static_cast<double>(actions.size());
  m.sigma.setZero();
  for (const auto& a : actions) {
    Eigen::Vector2d d = a - m.mu;
    m.sigma += d * d.transpose();
  }
  m.sigma /= static_cast<double>(actions.size());
  m.sigma += 1e-8 * Eigen::Matrix2d::Identity();
  if (m.sigma(0, 0) <= 0.0 || m.sigma.determinant() <= 0.0)
    throw DegenerateData("covariance not positive definite after jitter");
  return m;
}

sim::Action sample_static_gaussian(const StaticGaussianModel& model,
                                   RngStream& rng) {
  Eigen::LLT<Eigen::Matrix2d> llt(model.sigma);
  Eigen::Matrix2d chol = llt.matrixL();
  Eigen::Vector2d z(rng.normal(), rng.normal());
  Eigen::Vector2d a = model.mu + chol * z;
  return {a[0], a[1]};
}

double static_gaussian_log_likelihood(const StaticGaussianModel& model,
                                      const Eigen::Vector2d& action) {
  Eigen::Vector2d d = action - model.mu;
  double quad = d.transpose() * model.sigma.inverse() * d;
  return -0.5 * (quad + std::log(model.sigma.determinant()) +
                 2.0 * std::log(2.0 * M_PI));
}

}  // namespace dm::drivers
