#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "dm/geometry.hpp"
#include "dm/rng.hpp"

namespace dm::sim {

struct Shape {
  double length = 4.5;
  double width = 1.8;
};

struct Action {
  double accel = 0.0;      // longitudinal, m/s^2
  double turn_rate = 0.0;  // rad/s
};

struct VehicleState {
  int id = 0;
  GlobalPose pose;
  LanePosition lane_pos;
  double speed = 0.0;  // signed longitudinal speed; negative allowed
  Shape shape;
  Action last_action;  // most recently applied action
};

struct SimConfig {
  double dt = 0.1;            // seconds per step
  int horizon = 200;          // steps per episode (20 s at 10 Hz)
  double accel_bound = 5.0;   // |a| clamp, m/s^2
  double turn_rate_bound = 0.5;  // |omega| clamp, rad/s
  uint64_t rng_seed = 0;
};

/// Snapshot of the world at one step. Copyable; the roadway is shared.
struct Scene {
  int64_t step_index = 0;
  std::vector<VehicleState> vehicles;
  RoadwayPtr roadway;

  const VehicleState* find(int id) const;
  VehicleState* find(int id);
  const VehicleState& require(int id) const;  // throws UnknownVehicle
};

Action clamp_action(const Action& a, const SimConfig& cfg);

/// Forward-Euler kinematics, speed and heading updated before position.
/// The action is applied as given (callers clamp); throws NonFiniteState.
VehicleState propagate(const VehicleState& state, const Action& action,
                       double dt, const RoadwayGeometry& roadway);

/// Propagate every vehicle simultaneously from the pre-step scene. Each
/// vehicle must have exactly one action in the map (MissingAction
/// otherwise); actions are clamped to the configured bounds.
Scene step_scene(const Scene& scene, const std::map<int, Action>& actions,
                 const SimConfig& cfg);

/// Corners of the oriented body rectangle, counterclockwise.
std::array<std::pair<double, double>, 4> body_corners(const GlobalPose& pose,
                                                      const Shape& shape);

/// Closed-set overlap test between two oriented rectangles (touching counts).
bool rectangles_overlap(const GlobalPose& pa, const Shape& sa,
                        const GlobalPose& pb, const Shape& sb);

/// Minimum distance between two oriented rectangles; 0 when overlapping.
double rectangle_distance(const GlobalPose& pa, const Shape& sa,
                          const GlobalPose& pb, const Shape& sb);

/// All colliding pairs, each as (lower id, higher id), sorted.
std::vector<std::pair<int, int>> detect_collisions(const Scene& scene);

/// Smallest body-to-body distance from `ego` to any other vehicle (the d_c
/// input of the penalty function); +infinity for a lone vehicle.
double min_body_distance(const Scene& scene, int ego_id);

/// Signed distance from the vehicle's outermost body edge to the nearer road
/// edge; negative when the body protrudes beyond the edge.
double distance_to_road_edge(const VehicleState& state,
                             const RoadwayGeometry& roadway);

struct LeaderInfo {
  int id = -1;
  double gap = 0.0;            // bumper-to-bumper, floored at 0
  double closing_speed = 0.0;  // r = v_leader - v_ego
};

/// Nearest vehicle ahead of `ego` in the given lane by arclength (wrapping
/// on the oval). Lane membership is nearest-lane assignment.
std::optional<LeaderInfo> leader_lookup(const Scene& scene, int ego_id,
                                        int lane);

/// Nearest vehicle behind `ego` in the given lane.
std::optional<LeaderInfo> follower_lookup(const Scene& scene, int ego_id,
                                          int lane);

/// Source of recorded scenes (demonstration playback).
class SceneSource {
 public:
  virtual ~SceneSource() = default;
  virtual int64_t episode_count() const = 0;
  virtual int64_t episode_length(int64_t episode) const = 0;
  virtual int vehicle_count(int64_t episode) const = 0;
  virtual Scene scene_at(int64_t episode, int64_t step) const = 0;
};

struct SampledScene {
  Scene scene;
  std::vector<int> controlled_ids;
  int64_t episode = 0;
  int64_t start_step = 0;
};

/// Draw a scene at a random start index from the source and mark exactly
/// `controlled` distinct vehicles as policy controlled. `min_remaining`
/// steps must remain after the start index.
SampledScene sample_initial_scene(const SceneSource& source, int controlled,
                                  int64_t min_remaining, RngStream& rng);

}  // namespace dm::sim
