#include "dm/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dm::sim {

namespace {
constexpr double kUnboundedCorridor = 1e18;
}

const VehicleState* Scene::find(int id) const {
  for (const auto& v : vehicles)
    if (v.id == id) return &v;
  return nullptr;
}

VehicleState* Scene::find(int id) {
  for (auto& v : vehicles)
    if (v.id == id) return &v;
  return nullptr;
}

const VehicleState& Scene::require(int id) const {
  const VehicleState* v = find(id);
  if (!v) throw UnknownVehicle("vehicle " + std::to_string(id));
  return *v;
}

Action clamp_action(const Action& a, const SimConfig& cfg) {
  Action out;
  out.accel = std::clamp(a.accel, -cfg.accel_bound, cfg.accel_bound);
  out.turn_rate =
      std::clamp(a.turn_rate, -cfg.turn_rate_bound, cfg.turn_rate_bound);
  return out;
}

VehicleState propagate(const VehicleState& state, const Action& action,
                       double dt, const RoadwayGeometry& roadway) {
  VehicleState next = state;
  next.pose.theta = normalize_angle(state.pose.theta + action.turn_rate * dt);
  next.speed = state.speed + action.accel * dt;
  next.pose.x = state.pose.x + next.speed * std::cos(next.pose.theta) * dt;
  next.pose.y = state.pose.y + next.speed * std::sin(next.pose.theta) * dt;
  if (!std::isfinite(next.pose.x) || !std::isfinite(next.pose.y) ||
      !std::isfinite(next.pose.theta) || !std::isfinite(next.speed))
    throw NonFiniteState("propagate produced a non-finite state");
  // Lane bookkeeping must stay defined however far a learner strays, so the
  // corridor check is suspended here; explicit project() calls keep it.
  next.lane_pos = roadway.project(next.pose, kUnboundedCorridor);
  next.last_action = action;
  return next;
}

Scene step_scene(const Scene& scene, const std::map<int, Action>& actions,
                 const SimConfig& cfg) {
  Scene next;
  next.step_index = scene.step_index + 1;
  next.roadway = scene.roadway;
  next.vehicles.reserve(scene.vehicles.size());
  for (const auto& v : scene.vehicles) {
    auto it = actions.find(v.id);
    if (it == actions.end())
      throw MissingAction("no action for vehicle " + std::to_string(v.id));
    next.vehicles.push_back(
        propagate(v, clamp_action(it->second, cfg), cfg.dt, *scene.roadway));
  }
  return next;
}

std::array<std::pair<double, double>, 4> body_corners(const GlobalPose& pose,
                                                      const Shape& shape) {
  double c = std::cos(pose.theta), s = std::sin(pose.theta);
  double hl = shape.length / 2.0, hw = shape.width / 2.0;
  std::array<std::pair<double, double>, 4> out;
  const double lx[4] = {hl, -hl, -hl, hl};
  const double ly[4] = {hw, hw, -hw, -hw};
  for (int i = 0; i < 4; ++i) {
    out[static_cast<size_t>(i)] = {pose.x + c * lx[i] - s * ly[i],
                                   pose.y + s * lx[i] + c * ly[i]};
  }
  return out;
}

namespace {

// Project corners onto an axis; closed-interval overlap check.
bool axis_separates(const std::array<std::pair<double, double>, 4>& a,
                    const std::array<std::pair<double, double>, 4>& b,
                    double ax, double ay) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (const auto& [x, y] : a) {
    double p = x * ax + y * ay;
    amin = std::min(amin, p);
    amax = std::max(amax, p);
  }
  for (const auto& [x, y] : b) {
    double p = x * ax + y * ay;
    bmin = std::min(bmin, p);
    bmax = std::max(bmax, p);
  }
  return amax < bmin || bmax < amin;  // strict: touching is not separation
}

double point_segment_distance(double px, double py, double x1, double y1,
                              double x2, double y2) {
  double dx = x2 - x1, dy = y2 - y1;
  double len2 = dx * dx + dy * dy;
  double u = len2 > 0 ? ((px - x1) * dx + (py - y1) * dy) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  return std::hypot(px - (x1 + u * dx), py - (y1 + u * dy));
}

double segment_segment_distance(const std::pair<double, double>& a1,
                                const std::pair<double, double>& a2,
                                const std::pair<double, double>& b1,
                                const std::pair<double, double>& b2) {
  double d = point_segment_distance(a1.first, a1.second, b1.first, b1.second,
                                    b2.first, b2.second);
  d = std::min(d, point_segment_distance(a2.first, a2.second, b1.first,
                                         b1.second, b2.first, b2.second));
  d = std::min(d, point_segment_distance(b1.first, b1.second, a1.first,
                                         a1.second, a2.first, a2.second));
  d = std::min(d, point_segment_distance(b2.first, b2.second, a1.first,
                                         a1.second, a2.first, a2.second));
  return d;
}

}  // namespace

bool rectangles_overlap(const GlobalPose& pa, const Shape& sa,
                        const GlobalPose& pb, const Shape& sb) {
  auto ca = body_corners(pa, sa);
  auto cb = body_corners(pb, sb);
  double axes[4][2] = {
      {std::cos(pa.theta), std::sin(pa.theta)},
      {-std::sin(pa.theta), std::cos(pa.theta)},
      {std::cos(pb.theta), std::sin(pb.theta)},
      {-std::sin(pb.theta), std::cos(pb.theta)},
  };
  for (auto& axis : axes)
    if (axis_separates(ca, cb, axis[0], axis[1])) return false;
  return true;
}

double rectangle_distance(const GlobalPose& pa, const Shape& sa,
                          const GlobalPose& pb, const Shape& sb) {
  if (rectangles_overlap(pa, sa, pb, sb)) return 0.0;
  auto ca = body_corners(pa, sa);
  auto cb = body_corners(pb, sb);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      best = std::min(best, segment_segment_distance(
                                ca[static_cast<size_t>(i)],
                                ca[static_cast<size_t>((i + 1) % 4)],
                                cb[static_cast<size_t>(j)],
                                cb[static_cast<size_t>((j + 1) % 4)]));
    }
  }
  return best;
}

std::vector<std::pair<int, int>> detect_collisions(const Scene& scene) {
  std::vector<std::pair<int, int>> out;
  const auto& vs = scene.vehicles;
  for (size_t i = 0; i < vs.size(); ++i) {
    for (size_t j = i + 1; j < vs.size(); ++j) {
      // cheap radius prescreen
      double dx = vs[i].pose.x - vs[j].pose.x;
      double dy = vs[i].pose.y - vs[j].pose.y;
      double ri = std::hypot(vs[i].shape.length, vs[i].shape.width) / 2.0;
      double rj = std::hypot(vs[j].shape.length, vs[j].shape.width) / 2.0;
      if (dx * dx + dy * dy > (ri + rj) * (ri + rj)) continue;
      if (rectangles_overlap(vs[i].pose, vs[i].shape, vs[j].pose,
                             vs[j].shape)) {
        out.emplace_back(std::min(vs[i].id, vs[j].id),
                         std::max(vs[i].id, vs[j].id));
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double min_body_distance(const Scene& scene, int ego_id) {
  const VehicleState& ego = scene.require(ego_id);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& v : scene.vehicles) {
    if (v.id == ego_id) continue;
    best = std::min(best,
                    rectangle_distance(ego.pose, ego.shape, v.pose, v.shape));
    if (best == 0.0) break;
  }
  return best;
}

double distance_to_road_edge(const VehicleState& state,
                             const RoadwayGeometry& roadway) {
  const LanePosition& lp = state.lane_pos;
  double u = roadway.lane_offset(lp.lane) + lp.t;
  double half_extent = (state.shape.length / 2.0) * std::abs(std::sin(lp.phi)) +
                       (state.shape.width / 2.0) * std::abs(std::cos(lp.phi));
  double d_left = roadway.left_edge_offset() - u - half_extent;
  double d_right = u - roadway.right_edge_offset() - half_extent;
  return std::min(d_left, d_right);
}

namespace {

std::optional<LeaderInfo> neighbor_lookup(const Scene& scene, int ego_id,
                                          int lane, bool ahead) {
  const VehicleState& ego = scene.require(ego_id);
  const RoadwayGeometry& road = *scene.roadway;
  LanePosition ego_in_lane = road.project_to_lane(ego.pose, lane);
  std::optional<LeaderInfo> best;
  double best_centers = std::numeric_limits<double>::infinity();
  for (const auto& v : scene.vehicles) {
    if (v.id == ego_id) continue;
    if (v.lane_pos.lane != lane) continue;
    double centers = ahead
                         ? road.forward_gap(lane, ego_in_lane.s, v.lane_pos.s)
                         : road.forward_gap(lane, v.lane_pos.s, ego_in_lane.s);
    if (centers <= 0.0) continue;  // behind on a straight, co-located on oval
    if (centers < best_centers) {
      best_centers = centers;
      LeaderInfo info;
      info.id = v.id;
      info.gap = std::max(
          0.0, centers - (ego.shape.length + v.shape.length) / 2.0);
      info.closing_speed = ahead ? v.speed - ego.speed : ego.speed - v.speed;
      best = info;
    }
  }
  return best;
}

}  // namespace

std::optional<LeaderInfo> leader_lookup(const Scene& scene, int ego_id,
                                        int lane) {
  return neighbor_lookup(scene, ego_id, lane, true);
}

std::optional<LeaderInfo> follower_lookup(const Scene& scene, int ego_id,
                                          int lane) {
  return neighbor_lookup(scene, ego_id, lane, false);
}

SampledScene sample_initial_scene(const SceneSource& source, int controlled,
                                  int64_t min_remaining, RngStream& rng) {
  std::vector<int64_t> eligible;
  for (int64_t e = 0; e < source.episode_count(); ++e) {
    if (source.vehicle_count(e) >= controlled &&
        source.episode_length(e) >= min_remaining)
      eligible.push_back(e);
  }
  if (eligible.empty())
    throw InsufficientVehicles(
        "no episode offers " + std::to_string(controlled) +
        " vehicles over " + std::to_string(min_remaining) + " steps");

  int64_t episode = eligible[static_cast<size_t>(
      rng.uniform_int(0, static_cast<int64_t>(eligible.size()) - 1))];
  int64_t latest_start = source.episode_length(episode) - min_remaining;
  int64_t start = latest_start > 0 ? rng.uniform_int(0, latest_start) : 0;

  SampledScene out;
  out.episode = episode;
  out.start_step = start;
  out.scene = source.scene_at(episode, start);

  int n = static_cast<int>(out.scene.vehicles.size());
  if (n < controlled)
    throw InsufficientVehicles("scene holds fewer vehicles than requested");
  std::vector<int> picks = rng.sample_without_replacement(n, controlled);
  std::sort(picks.begin(), picks.end());
  out.controlled_ids.reserve(picks.size());
  for (int p : picks)
    out.controlled_ids.push_back(out.scene.vehicles[static_cast<size_t>(p)].id);
  return out;
}

}  // namespace dm::sim
