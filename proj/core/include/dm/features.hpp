#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dm/scene.hpp"

namespace dm::feat {

struct FeatureConfig {
  int n_beams = 20;
  double max_range = 100.0;           // meters; also the absent-leader sentinel
  double undefined_time_value = 30.0;  // seconds, for undefined timegap / TTC
  bool ego = true;
  bool leader = true;
  bool lidar = true;
  bool temporal = true;
  bool indicators = true;
};

/// Index map over the observation vector's feature groups. Written into
/// every checkpoint and report so consumers can decode vectors exactly.
struct ObservationLayout {
  struct Group {
    std::string name;
    int offset = 0;
    int size = 0;
    bool operator==(const Group&) const = default;
  };
  std::vector<Group> groups;
  int total = 0;

  static ObservationLayout from_config(const FeatureConfig& cfg);
  nlohmann::json to_json() const;
  static ObservationLayout from_json(const nlohmann::json& j);
  bool operator==(const ObservationLayout&) const = default;
};

inline constexpr int kEgoFeatureCount = 12;
inline constexpr int kLeaderFeatureCount = 3;
inline constexpr int kTemporalFeatureCount = 2;
inline constexpr int kIndicatorFeatureCount = 3;

/// Ego block: [lane-relative speed, lane-relative heading, lane offset,
/// length, width, longitudinal accel, lateral accel, turn rate, yaw rate,
/// lane curvature, distance to left marker, distance to right marker].
/// Marker distances are measured from the body edge; accelerations and
/// rates come from the last applied action.
std::vector<double> extract_ego_features(const sim::Scene& scene, int ego_id);

/// Leader block: [gap, relative speed, leader longitudinal accel];
/// [max_range, 0, 0] when no leader exists.
std::vector<double> extract_leader_features(const sim::Scene& scene,
                                            int ego_id,
                                            const FeatureConfig& cfg);

struct LidarScan {
  std::vector<double> ranges;  // capped at max_range
  std::vector<double> rates;   // d(range)/dt along the beam; negative closes
};

/// Beam k points at ego-frame angle 2*pi*k/n_beams. Range is the distance
/// from the ego center to the nearest body rectangle of another vehicle.
LidarScan lidar_scan(const sim::Scene& scene, int ego_id,
                     const FeatureConfig& cfg);

/// [timegap, time-to-collision], both capped at undefined_time_value.
std::vector<double> temporal_features(const sim::Scene& scene, int ego_id,
                                      const FeatureConfig& cfg);

/// [in collision, out of lane or off road, negative speed] as 0/1 flags.
std::vector<double> indicator_features(const sim::Scene& scene, int ego_id);

/// Full observation in layout order; throws NonFiniteState if any entry is
/// not finite.
std::vector<double> extract_observation(const sim::Scene& scene, int ego_id,
                                        const FeatureConfig& cfg);

}  // namespace dm::feat
