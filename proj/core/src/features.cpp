#include "dm/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace dm::feat {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ObservationLayout ObservationLayout::from_config(const FeatureConfig& cfg) {
  ObservationLayout layout;
  int at = 0;
  auto push = [&](const std::string& name, int size) {
    layout.groups.push_back({name, at, size});
    at += size;
  };
  if (cfg.ego) push("ego", kEgoFeatureCount);
  if (cfg.leader) push("leader", kLeaderFeatureCount);
  if (cfg.lidar) {
    push("lidar_range", cfg.n_beams);
    push("lidar_rate", cfg.n_beams);
  }
  if (cfg.temporal) push("temporal", kTemporalFeatureCount);
  if (cfg.indicators) push("indicators", kIndicatorFeatureCount);
  layout.total = at;
  return layout;
}

nlohmann::json ObservationLayout::to_json() const {
  nlohmann::json groups_json = nlohmann::json::array();
  for (const auto& g : groups)
    groups_json.push_back(
        {{"name", g.name}, {"offset", g.offset}, {"size", g.size}});
  return {{"total", total}, {"groups", groups_json}};
}

ObservationLayout ObservationLayout::from_json(const nlohmann::json& j) {
  ObservationLayout layout;
  layout.total = j.at("total").get<int>();
  for (const auto& g : j.at("groups")) {
    layout.groups.push_back({g.at("name").get<std::string>(),
                             g.at("offset").get<int>(),
                             g.at("size").get<int>()});
  }
  return layout;
}

std::vector<double> extract_ego_features(const sim::Scene& scene, int ego_id) {
  const auto& ego = scene.require(ego_id);
  const auto& road = *scene.roadway;
  const auto& lp = ego.lane_pos;

  double lane_speed = ego.speed * std::cos(lp.phi);
  double accel = ego.last_action.accel;
  double turn_rate = ego.last_action.turn_rate;
  double lateral_accel = ego.speed * turn_rate;
  // Heading integrates the commanded turn rate exactly under these
  // kinematics, so the global yaw rate equals the applied turn rate.
  double yaw_rate = turn_rate;
  double curvature = road.curvature(lp.lane, lp.s);
  double half_extent =
      (ego.shape.length / 2.0) * std::abs(std::sin(lp.phi)) +
      (ego.shape.width / 2.0) * std::abs(std::cos(lp.phi));
  double marker_left = road.lane_width() / 2.0 - lp.t - half_extent;
  double marker_right = road.lane_width() / 2.0 + lp.t - half_extent;

  return {lane_speed, lp.phi,       lp.t,        ego.shape.length,
          ego.shape.width, accel,   lateral_accel, turn_rate,
          yaw_rate,   curvature,    marker_left, marker_right};
}

std::vector<double> extract_leader_features(const sim::Scene& scene,
                                            int ego_id,
                                            const FeatureConfig& cfg) {
  const auto& ego = scene.require(ego_id);
  auto leader = sim::leader_lookup(scene, ego_id, ego.lane_pos.lane);
  if (!leader) return {cfg.max_range, 0.0, 0.0};
  const auto& lead = scene.require(leader->id);
  return {leader->gap, leader->closing_speed, lead.last_action.accel};
}

namespace {

// Nearest forward intersection of a ray with a segment; +inf when none.
double ray_segment(double ox, double oy, double dx, double dy, double x1,
                   double y1, double x2, double y2) {
  double ex = x2 - x1, ey = y2 - y1;
  double det = dx * ey - dy * ex;
  if (std::abs(det) < 1e-12) return kInf;
  double qx = x1 - ox, qy = y1 - oy;
  double t = (qx * ey - qy * ex) / det;   // distance along the ray
  double u = (qx * dy - qy * dx) / det;   // position along the segment
  if (t >= 0.0 && u >= 0.0 && u <= 1.0) return t;
  return kInf;
}

}  // namespace

LidarScan lidar_scan(const sim::Scene& scene, int ego_id,
                     const FeatureConfig& cfg) {
  const auto& ego = scene.require(ego_id);
  LidarScan scan;
  scan.ranges.assign(static_cast<size_t>(cfg.n_beams), cfg.max_range);
  scan.rates.assign(static_cast<size_t>(cfg.n_beams), 0.0);

  double ego_vx = ego.speed * std::cos(ego.pose.theta);
  double ego_vy = ego.speed * std::sin(ego.pose.theta);

  for (int k = 0; k < cfg.n_beams; ++k) {
    double angle = ego.pose.theta +
                   2.0 * std::numbers::pi * k / static_cast<double>(cfg.n_beams);
    double dx = std::cos(angle), dy = std::sin(angle);
    double best = cfg.max_range;
    const sim::VehicleState* hit = nullptr;
    for (const auto& v : scene.vehicles) {
      if (v.id == ego_id) continue;
      auto corners = sim::body_corners(v.pose, v.shape);
      for (int e = 0; e < 4; ++e) {
        const auto& [x1, y1] = corners[static_cast<size_t>(e)];
        const auto& [x2, y2] = corners[static_cast<size_t>((e + 1) % 4)];
        double t = ray_segment(ego.pose.x, ego.pose.y, dx, dy, x1, y1, x2, y2);
        if (t < best) {
          best = t;
          hit = &v;
        }
      }
    }
    scan.ranges[static_cast<size_t>(k)] = best;
    if (hit) {
      double rvx = hit->speed * std::cos(hit->pose.theta) - ego_vx;
      double rvy = hit->speed * std::sin(hit->pose.theta) - ego_vy;
      scan.rates[static_cast<size_t>(k)] = rvx * dx + rvy * dy;
    }
  }
  return scan;
}

std::vector<double> temporal_features(const sim::Scene& scene, int ego_id,
                                      const FeatureConfig& cfg) {
  const auto& ego = scene.require(ego_id);
  auto leader = sim::leader_lookup(scene, ego_id, ego.lane_pos.lane);
  double cap = cfg.undefined_time_value;
  double timegap = cap, ttc = cap;
  if (leader) {
    if (ego.speed > 0.1) timegap = std::min(leader->gap / ego.speed, cap);
    if (leader->closing_speed < -0.1)
      ttc = std::min(leader->gap / (-leader->closing_speed), cap);
  }
  return {timegap, ttc};
}

std::vector<double> indicator_features(const sim::Scene& scene, int ego_id) {
  const auto& ego = scene.require(ego_id);
  const auto& road = *scene.roadway;

  bool colliding = false;
  for (const auto& v : scene.vehicles) {
    if (v.id == ego_id) continue;
    if (sim::rectangles_overlap(ego.pose, ego.shape, v.pose, v.shape)) {
      colliding = true;
      break;
    }
  }
  bool out_of_lane = std::abs(ego.lane_pos.t) > road.lane_width() / 2.0 ||
                     sim::distance_to_road_edge(ego, road) < 0.0;
  bool reversing = ego.speed < 0.0;
  return {colliding ? 1.0 : 0.0, out_of_lane ? 1.0 : 0.0,
          reversing ? 1.0 : 0.0};
}

std::vector<double> extract_observation(const sim::Scene& scene, int ego_id,
                                        const FeatureConfig& cfg) {
  std::vector<double> obs;
  auto append = [&obs](const std::vector<double>& vals) {
    obs.insert(obs.end(), vals.begin(), vals.end());
  };
  if (cfg.ego) append(extract_ego_features(scene, ego_id));
  if (cfg.leader) append(extract_leader_features(scene, ego_id, cfg));
  if (cfg.lidar) {
    LidarScan scan = lidar_scan(scene, ego_id, cfg);
    append(scan.ranges);
    append(scan.rates);
  }
  if (cfg.temporal) append(temporal_features(scene, ego_id, cfg));
  if (cfg.indicators) append(indicator_features(scene, ego_id));
  for (double v : obs) {
    if (!std::isfinite(v))
      throw NonFiniteState("observation contains a non-finite entry");
  }
  return obs;
}

}  // namespace dm::feat
