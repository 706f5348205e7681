#pragma once

#include <cmath>
#include <memory>

#include "dm/error.hpp"

namespace dm::sim {

/// Normalize an angle to (-pi, pi].
double normalize_angle(double a);

struct GlobalPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // world heading, radians
};

/// Curvilinear position relative to one lane.
struct LanePosition {
  int lane = 0;
  double s = 0.0;    // arclength along that lane's centerline
  double t = 0.0;    // signed lateral offset, left positive
  double phi = 0.0;  // heading relative to the lane tangent
};

/// Roadway geometry: either an open straight segment of parallel lanes along
/// +x (lane 0 centerline on y = 0, lanes increasing leftward), or a closed
/// oval track (two straights joined by two semicircles, traversed
/// counterclockwise; lane 0 is the outermost lane and its centerline is the
/// reference centerline).
///
/// On the straight roadway, `length` bounds the spawn region only; the s
/// coordinate is unbounded so vehicles may drive past the segment end. On
/// the oval, s wraps modulo the lane's own centerline length.
class RoadwayGeometry {
 public:
  enum class Kind { Straight, Oval };

  static RoadwayGeometry straight(double length, int lane_count,
                                  double lane_width);
  static RoadwayGeometry oval(double straight_length, double curve_radius,
                              int lane_count, double lane_width);

  Kind kind() const { return kind_; }
  bool is_closed() const { return kind_ == Kind::Oval; }
  int lane_count() const { return lane_count_; }
  double lane_width() const { return lane_width_; }
  double straight_length() const { return straight_length_; }
  double curve_radius() const { return curve_radius_; }

  /// Lateral offset of lane i's centerline from the reference (lane 0).
  double lane_offset(int lane) const { return lane * lane_width_; }

  /// Radius of lane i's centerline on the oval curves.
  double lane_radius(int lane) const { return curve_radius_ - lane_offset(lane); }

  /// Arclength of one full lap of lane i (oval); spawn-region length for a
  /// straight roadway.
  double lane_length(int lane) const;

  /// Reference centerline length: lane 0's length.
  double centerline_length() const { return lane_length(0); }

  /// Lateral road-frame coordinate of the edges, measured from lane 0.
  double left_edge_offset() const {
    return lane_offset(lane_count_ - 1) + lane_width_ / 2.0;
  }
  double right_edge_offset() const { return -lane_width_ / 2.0; }

  /// Projection onto the nearest lane. Throws OutOfCorridor when the pose
  /// lies more than `corridor_lanes` lane widths beyond the outermost edge.
  LanePosition project(const GlobalPose& pose,
                       double corridor_lanes = 3.0) const;

  /// Projection onto a fixed lane index.
  LanePosition project_to_lane(const GlobalPose& pose, int lane) const;

  /// Pose of lane i's centerline point at arclength s (phi = 0, t = 0).
  GlobalPose lane_center_pose(int lane, double s) const;

  /// Full inverse of project_to_lane.
  GlobalPose pose_from(const LanePosition& lp) const;

  /// Signed curvature of lane i's centerline at s (left turn positive).
  double curvature(int lane, double s) const;

  /// Wrap s into [0, lane_length) on the oval; identity on a straight.
  double wrap_s(int lane, double s) const;

  /// Arclength from s_from forward to s_to along lane i. Wraps into
  /// [0, lane_length) on the oval; signed difference on a straight.
  double forward_gap(int lane, double s_from, double s_to) const;

 private:
  RoadwayGeometry() = default;

  struct RefProjection {
    double s_ref = 0;        // arclength fraction bookkeeping, see .cpp
    double t_ref = 0;        // lateral offset from the reference centerline
    double tangent = 0;      // tangent heading at the projection
    int region = 0;          // 0 bottom straight, 1 curve, 2 top straight, 3 curve
    double arc_angle = 0;    // progressed angle within a curve region
  };
  RefProjection project_reference_(const GlobalPose& pose) const;
  LanePosition lane_from_reference_(const RefProjection& rp, int lane,
                                    double theta) const;

  Kind kind_ = Kind::Straight;
  double straight_length_ = 0;  // straight: segment length; oval: each straight
  double curve_radius_ = 0;
  int lane_count_ = 1;
  double lane_width_ = 3.6;
};

using RoadwayPtr = std::shared_ptr<const RoadwayGeometry>;

}  // namespace dm::sim
