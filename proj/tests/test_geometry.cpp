#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dm/geometry.hpp"
#include "dm/rng.hpp"

using namespace dm;
using namespace dm::sim;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("straight road: on-centerline projection") {
  RoadwayGeometry road = RoadwayGeometry::straight(640, 5, 3.6);
  LanePosition lp = road.project({10.0, 0.0, 0.0});
  CHECK(lp.lane == 0);
  CHECK(lp.s == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(lp.t == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(lp.phi == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("straight road: lateral offset is y") {
  RoadwayGeometry road = RoadwayGeometry::straight(640, 5, 3.6);
  LanePosition lp = road.project({10.0, 1.5, 0.1});
  CHECK(lp.lane == 0);
  CHECK(lp.s == doctest::Approx(10.0));
  CHECK(lp.t == doctest::Approx(1.5));
  CHECK(lp.phi == doctest::Approx(0.1));
  // nearest-lane assignment
  CHECK(road.project({10.0, 5.0, 0.0}).lane == 1);
}

TEST_CASE("oval: top of the first semicircle, dense-sampling oracle") {
  const double S = 100.0, R = 50.0;
  RoadwayGeometry road = RoadwayGeometry::oval(S, R, 1, 3.6);
  // pose at the apex of the first semicircle, 2 m outside the centerline
  GlobalPose pose{S + R + 2.0, R, kPi / 2.0};
  LanePosition lp = road.project(pose);
  CHECK(lp.lane == 0);
  CHECK(lp.s == doctest::Approx(S + kPi * R / 2.0).epsilon(1e-9));
  CHECK(lp.t == doctest::Approx(-2.0).epsilon(1e-9));  // outside = right of travel

  // oracle: dense sampling of centerline points, nearest-point search
  double best_s = 0, best_d = 1e18;
  double len = road.lane_length(0);
  for (double s = 0; s < len; s += 0.0005) {
    GlobalPose c = road.lane_center_pose(0, s);
    double d = std::hypot(c.x - pose.x, c.y - pose.y);
    if (d < best_d) {
      best_d = d;
      best_s = s;
    }
  }
  CHECK(lp.s == doctest::Approx(best_s).epsilon(1e-5));
  CHECK(std::abs(lp.t) == doctest::Approx(best_d).epsilon(1e-6));
}

TEST_CASE("projection round-trip on the straight roadway") {
  RoadwayGeometry road = RoadwayGeometry::straight(640, 5, 3.6);
  RngStream rng(7);
  for (int i = 0; i < 200; ++i) {
    GlobalPose pose{rng.uniform(0, 640), rng.uniform(-1.8, 5 * 3.6),
                    rng.uniform(-1.0, 1.0)};
    LanePosition lp = road.project(pose);
    GlobalPose back = road.pose_from(lp);
    CHECK(back.x == doctest::Approx(pose.x).epsilon(1e-9));
    CHECK(back.y == doctest::Approx(pose.y).epsilon(1e-9));
    CHECK(back.theta == doctest::Approx(pose.theta).epsilon(1e-9));
  }
}

TEST_CASE("projection round-trip on the oval") {
  RoadwayGeometry road = RoadwayGeometry::oval(120, 40, 3, 3.6);
  RngStream rng(8);
  for (int i = 0; i < 300; ++i) {
    int lane = static_cast<int>(rng.uniform_int(0, 2));
    LanePosition lp;
    lp.lane = lane;
    lp.s = rng.uniform(0, road.lane_length(lane));
    lp.t = rng.uniform(-1.7, 1.7);
    lp.phi = rng.uniform(-0.5, 0.5);
    GlobalPose pose = road.pose_from(lp);
    LanePosition back = road.project_to_lane(pose, lane);
    CHECK(back.s == doctest::Approx(lp.s).epsilon(1e-8));
    CHECK(back.t == doctest::Approx(lp.t).epsilon(1e-8));
    CHECK(back.phi == doctest::Approx(lp.phi).epsilon(1e-8));
  }
}

TEST_CASE("wraparound conservation over one lap") {
  RoadwayGeometry road = RoadwayGeometry::oval(80, 30, 2, 3.6);
  for (int lane = 0; lane < 2; ++lane) {
    double len = road.lane_length(lane);
    const int steps = 5000;
    double advanced = 0;
    double prev_s = road.project_to_lane(road.lane_center_pose(lane, 0.0), lane).s;
    for (int k = 1; k <= steps; ++k) {
      double target = len * static_cast<double>(k) / steps;
      LanePosition lp =
          road.project_to_lane(road.lane_center_pose(lane, target), lane);
      advanced += road.forward_gap(lane, prev_s, lp.s);
      prev_s = lp.s;
    }
    CHECK(advanced == doctest::Approx(len).epsilon(1e-6));
  }
}

TEST_CASE("corridor violations throw") {
  RoadwayGeometry road = RoadwayGeometry::straight(640, 3, 3.6);
  CHECK_THROWS_AS(road.project({10.0, 100.0, 0.0}), OutOfCorridor);
  CHECK_THROWS_AS(road.project({10.0, -13.0, 0.0}), OutOfCorridor);
  // exactly 3 lane widths beyond the edge is still inside
  CHECK_NOTHROW(road.project({10.0, -1.8 - 3 * 3.6 + 0.01, 0.0}));
}

TEST_CASE("curvature: zero on straights, 1/r on oval curves") {
  RoadwayGeometry straight = RoadwayGeometry::straight(640, 3, 3.6);
  CHECK(straight.curvature(0, 100.0) == 0.0);

  RoadwayGeometry oval = RoadwayGeometry::oval(100, 50, 2, 3.6);
  CHECK(oval.curvature(0, 50.0) == 0.0);
  CHECK(oval.curvature(0, 100.0 + 1.0) == doctest::Approx(1.0 / 50.0));
  CHECK(oval.curvature(1, 100.0 + 1.0) == doctest::Approx(1.0 / (50.0 - 3.6)));
  double top_straight = 100.0 + kPi * 50.0 + 10.0;
  CHECK(oval.curvature(0, top_straight) == 0.0);
}

TEST_CASE("angle normalization lands in (-pi, pi]") {
  CHECK(normalize_angle(kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(-kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  CHECK(normalize_angle(-5 * kPi) == doctest::Approx(kPi));
}

TEST_CASE("invalid geometry parameters are rejected") {
  CHECK_THROWS_AS(RoadwayGeometry::straight(-1, 3, 3.6), ConfigError);
  CHECK_THROWS_AS(RoadwayGeometry::straight(100, 0, 3.6), ConfigError);
  // curve radius must clear the lane stack
  CHECK_THROWS_AS(RoadwayGeometry::oval(100, 10, 4, 3.6), ConfigError);
}
