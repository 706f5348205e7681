#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <span>
#include <string>

#include "dm/rng.hpp"
#include "dm/scene.hpp"

namespace dm::drivers {

/// Intelligent Driver Model parameters.
struct IdmParams {
  double v_des = 30.0;        // free speed, m/s
  double d_min = 2.0;         // minimum separation, m
  double time_headway = 1.5;  // minimum time separation tau, s
  double a_max = 3.0;         // acceleration limit, m/s^2
  double b_pref = 2.0;        // preferred deceleration, m/s^2
};

/// d_des = d_min + tau*v - v*r / (2*sqrt(a_max*b_pref)), floored at d_min.
/// r is relative speed of the leader, r = v_leader - v_ego.
double desired_gap(double v, double r, const IdmParams& p);

/// a = a_max * (1 - (v/v_des)^4 - (d_des/d)^2), clamped to [-b_hard, a_max].
/// An absent leader is modeled as d = +infinity (gap term vanishes).
/// Throws NonPositiveGap when a leader is present at d <= 0.
double idm_accel(double v, double r, double d, const IdmParams& p,
                 double b_hard = 9.0);

struct MobilParams {
  double politeness = 0.5;          // dimensionless in [0, 1]
  double accel_gain_threshold = 0.1;  // m/s^2
  double b_safe = 4.0;              // safety braking limit, m/s^2
};

/// MOBIL lane selection over {left, current, right}. A change is chosen iff
/// the prospective new follower keeps IDM deceleration >= -b_safe and the
/// politeness-weighted acceleration gain exceeds the threshold; ties keep
/// the current lane, the larger gain wins otherwise.
int mobil_decide_lane(const sim::Scene& scene, int ego_id,
                      const MobilParams& mp, const IdmParams& idm);

struct LaneTrackerParams {
  double k_offset = 0.05;   // (rad/s) per meter of lateral offset
  double k_heading = 2.5;   // (rad/s) per radian of heading error
};

/// Proportional centerline tracker: omega = -k_offset*t - k_heading*phi
/// relative to the target lane, clamped to the turn-rate bound.
double lane_track_turnrate(const sim::VehicleState& state, int target_lane,
                           const LaneTrackerParams& p,
                           const sim::RoadwayGeometry& roadway,
                           double turn_rate_bound);

enum class StyleClass { Aggressive = 0, Passive = 1, Speeder = 2, Tailgater = 3 };
inline constexpr int kStyleCount = 4;

const char* style_name(StyleClass s);
std::optional<StyleClass> style_from_name(const std::string& name);

struct NoiseParams {
  double sigma_accel = 0.1;  // m/s^2
  double sigma_turn = 0.01;  // rad/s
};

/// Per-class driving style: IDM/MOBIL parameters plus a Gaussian prior over
/// the desired speed, drawn once per vehicle at spawn.
struct StylePrior {
  IdmParams idm;
  MobilParams mobil;
  double v_des_mean = 30.0;
  double v_des_std = 2.0;
};

struct StyleLibrary {
  std::array<StylePrior, kStyleCount> classes;
  NoiseParams noise;
  LaneTrackerParams tracker;
  double lane_change_cooldown = 2.0;  // seconds between lane decisions

  static StyleLibrary defaults();
};

/// Controller state for one rule-driven vehicle.
struct StyleInstance {
  StyleClass style = StyleClass::Passive;
  IdmParams idm;
  MobilParams mobil;
  NoiseParams noise;
  LaneTrackerParams tracker;
  double lane_change_cooldown = 2.0;
  int target_lane = 0;
  double cooldown_left = 0.0;
};

StyleInstance spawn_style(const StyleLibrary& lib, StyleClass style,
                          int initial_lane, RngStream& rng);

/// IDM longitudinal + MOBIL/tracker lateral control with Gaussian action
/// noise. Deterministic given the rng state; consumes exactly two normal
/// draws per call. Mutates the instance's lane-decision state.
sim::Action rule_policy_action(const sim::Scene& scene, int ego_id,
                               StyleInstance& inst, double dt,
                               double turn_rate_bound, RngStream& rng);

/// Unchanging Gaussian action distribution baseline.
struct StaticGaussianModel {
  Eigen::Vector2d mu = Eigen::Vector2d::Zero();
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Identity();
};

/// Maximum-likelihood fit (divide by N) plus 1e-8 diagonal jitter.
StaticGaussianModel fit_static_gaussian(
    std::span<const Eigen::Vector2d> actions);

sim::Action sample_static_gaussian(const StaticGaussianModel& model,
                                   RngStream& rng);

double static_gaussian_log_likelihood(const StaticGaussianModel& model,
                                      const Eigen::Vector2d& action);

}  // namespace dm::drivers
