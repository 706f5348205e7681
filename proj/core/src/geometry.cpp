#include "dm/geometry.hpp"

#include <numbers>

namespace dm::sim {

namespace {
constexpr double kPi = std::numbers::pi;
}

double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a > kPi) a -= 2.0 * kPi;
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

RoadwayGeometry RoadwayGeometry::straight(double length, int lane_count,
                                          double lane_width) {
  if (length <= 0 || lane_count < 1 || lane_width <= 0)
    throw ConfigError("straight roadway: length > 0, lanes >= 1, width > 0");
  RoadwayGeometry g;
  g.kind_ = Kind::Straight;
  g.straight_length_ = length;
  g.lane_count_ = lane_count;
  g.lane_width_ = lane_width;
  return g;
}

RoadwayGeometry RoadwayGeometry::oval(double straight_length,
                                      double curve_radius, int lane_count,
                                      double lane_width) {
  if (straight_length <= 0 || curve_radius <= 0 || lane_count < 1 ||
      lane_width <= 0)
    throw ConfigError("oval roadway: positive dimensions required");
  if (curve_radius <= (lane_count - 1) * lane_width + lane_width / 2.0)
    throw ConfigError("oval roadway: curve radius too small for lane stack");
  RoadwayGeometry g;
  g.kind_ = Kind::Oval;
  g.straight_length_ = straight_length;
  g.curve_radius_ = curve_radius;
  g.lane_count_ = lane_count;
  g.lane_width_ = lane_width;
  return g;
}

double RoadwayGeometry::lane_length(int lane) const {
  if (kind_ == Kind::Straight) return straight_length_;
  return 2.0 * straight_length_ + 2.0 * kPi * lane_radius(lane);
}

double RoadwayGeometry::wrap_s(int lane, double s) const {
  if (kind_ == Kind::Straight) return s;
  double len = lane_length(lane);
  s = std::fmod(s, len);
  if (s < 0) s += len;
  return s;
}

double RoadwayGeometry::forward_gap(int lane, double s_from, double s_to) const {
  if (kind_ == Kind::Straight) return s_to - s_from;
  return wrap_s(lane, s_to - s_from);
}

RoadwayGeometry::RefProjection RoadwayGeometry::project_reference_(
    const GlobalPose& pose) const {
  RefProjection rp;
  if (kind_ == Kind::Straight) {
    rp.s_ref = pose.x;
    rp.t_ref = pose.y;
    rp.tangent = 0.0;
    rp.region = 0;
    return rp;
  }
  const double S = straight_length_, R = curve_radius_;
  if (pose.x > S) {  // first semicircle, center (S, R)
    double dx = pose.x - S, dy = pose.y - R;
    double alpha = std::atan2(dy, dx);  // in [-pi/2, pi/2] since dx > 0
    rp.region = 1;
    rp.arc_angle = alpha + kPi / 2.0;   // progressed angle in [0, pi]
    rp.t_ref = R - std::hypot(dx, dy);
    rp.tangent = alpha + kPi / 2.0;
  } else if (pose.x < 0.0) {  // second semicircle, center (0, R)
    double dx = pose.x, dy = pose.y - R;
    double alpha = std::atan2(dy, dx);
    // alpha in (pi/2, pi] or (-pi, -pi/2); progressed angle from pi/2
    double beta = alpha - kPi / 2.0;
    if (beta < 0) beta += 2.0 * kPi;
    rp.region = 3;
    rp.arc_angle = beta;  // in [0, pi]
    rp.t_ref = R - std::hypot(dx, dy);
    rp.tangent = alpha + kPi / 2.0;
  } else if (pose.y <= R) {  // bottom straight, heading +x
    rp.region = 0;
    rp.s_ref = pose.x;
    rp.t_ref = pose.y;
    rp.tangent = 0.0;
  } else {  // top straight, heading -x
    rp.region = 2;
    rp.s_ref = S - pose.x;
    rp.t_ref = 2.0 * R - pose.y;
    rp.tangent = kPi;
  }
  return rp;
}

LanePosition RoadwayGeometry::lane_from_reference_(const RefProjection& rp,
                                                   int lane,
                                                   double theta) const {
  LanePosition lp;
  lp.lane = lane;
  lp.t = rp.t_ref - lane_offset(lane);
  lp.phi = normalize_angle(theta - rp.tangent);
  if (kind_ == Kind::Straight) {
    lp.s = rp.s_ref;
    return lp;
  }
  const double S = straight_length_;
  const double r = lane_radius(lane);
  switch (rp.region) {
    case 0: lp.s = rp.s_ref; break;
    case 1: lp.s = S + r * rp.arc_angle; break;
    case 2: lp.s = S + kPi * r + rp.s_ref; break;
    default: lp.s = 2.0 * S + kPi * r + r * rp.arc_angle; break;
  }
  lp.s = wrap_s(lane, lp.s);
  return lp;
}

LanePosition RoadwayGeometry::project(const GlobalPose& pose,
                                      double corridor_lanes) const {
  RefProjection rp = project_reference_(pose);
  double lo = right_edge_offset() - corridor_lanes * lane_width_;
  double hi = left_edge_offset() + corridor_lanes * lane_width_;
  if (rp.t_ref < lo || rp.t_ref > hi)
    throw OutOfCorridor("pose is outside the roadway corridor");
  int lane = static_cast<int>(std::lround(rp.t_ref / lane_width_));
  lane = std::clamp(lane, 0, lane_count_ - 1);
  return lane_from_reference_(rp, lane, pose.theta);
}

LanePosition RoadwayGeometry::project_to_lane(const GlobalPose& pose,
                                              int lane) const {
  if (lane < 0 || lane >= lane_count_)
    throw ConfigError("project_to_lane: bad lane index");
  return lane_from_reference_(project_reference_(pose), lane, pose.theta);
}

GlobalPose RoadwayGeometry::lane_center_pose(int lane, double s) const {
  if (lane < 0 || lane >= lane_count_)
    throw ConfigError("lane_center_pose: bad lane index");
  GlobalPose p;
  if (kind_ == Kind::Straight) {
    p.x = s;
    p.y = lane_offset(lane);
    p.theta = 0.0;
    return p;
  }
  const double S = straight_length_, R = curve_radius_;
  const double u = lane_offset(lane);
  const double r = lane_radius(lane);
  s = wrap_s(lane, s);
  if (s < S) {
    p.x = s;
    p.y = u;
    p.theta = 0.0;
  } else if (s < S + kPi * r) {
    double alpha = -kPi / 2.0 + (s - S) / r;
    p.x = S + r * std::cos(alpha);
    p.y = R + r * std::sin(alpha);
    p.theta = normalize_angle(alpha + kPi / 2.0);
  } else if (s < 2.0 * S + kPi * r) {
    double d = s - S - kPi * r;
    p.x = S - d;
    p.y = 2.0 * R - u;
    p.theta = kPi;
  } else {
    double alpha = kPi / 2.0 + (s - 2.0 * S - kPi * r) / r;
    p.x = r * std::cos(alpha);
    p.y = R + r * std::sin(alpha);
    p.theta = normalize_angle(alpha + kPi / 2.0);
  }
  return p;
}

GlobalPose RoadwayGeometry::pose_from(const LanePosition& lp) const {
  GlobalPose center = lane_center_pose(lp.lane, lp.s);
  GlobalPose p;
  // left normal of the tangent direction
  double nx = -std::sin(center.theta), ny = std::cos(center.theta);
  p.x = center.x + lp.t * nx;
  p.y = center.y + lp.t * ny;
  p.theta = normalize_angle(center.theta + lp.phi);
  return p;
}

double RoadwayGeometry::curvature(int lane, double s) const {
  if (kind_ == Kind::Straight) return 0.0;
  const double S = straight_length_;
  const double r = lane_radius(lane);
  s = wrap_s(lane, s);
  bool on_curve = (s >= S && s < S + kPi * r) || (s >= 2.0 * S + kPi * r);
  return on_curve ? 1.0 / r : 0.0;
}

}  // namespace dm::sim
