#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dm/scene.hpp"

using namespace dm;
using namespace dm::sim;

namespace {

constexpr double kPi = std::numbers::pi;

RoadwayPtr straight_road(int lanes = 3, double width = 3.6) {
  return std::make_shared<RoadwayGeometry>(
      RoadwayGeometry::straight(640, lanes, width));
}

VehicleState make_vehicle(const RoadwayGeometry& road, int id, double x,
                          double y, double theta, double v,
                          Shape shape = {4.5, 1.8}) {
  VehicleState s;
  s.id = id;
  s.pose = {x, y, theta};
  s.speed = v;
  s.shape = shape;
  s.lane_pos = road.project(s.pose, 1e18);
  return s;
}

}  // namespace

TEST_CASE("propagate: constant velocity advances x") {
  auto road = straight_road();
  VehicleState v = make_vehicle(*road, 0, 5.0, 0.0, 0.0, 10.0);
  VehicleState next = propagate(v, {0.0, 0.0}, 0.1, *road);
  CHECK(next.pose.x == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(next.pose.y == 0.0);
  CHECK(next.speed == 10.0);
  CHECK(next.pose.theta == 0.0);
}

TEST_CASE("propagate: speed updates before position") {
  auto road = straight_road();
  VehicleState v = make_vehicle(*road, 0, 0.0, 0.0, 0.0, 0.0);
  VehicleState next = propagate(v, {2.0, 0.0}, 0.1, *road);
  CHECK(next.speed == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(next.pose.x == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("propagate: heading updates before position") {
  auto road = straight_road();
  VehicleState v = make_vehicle(*road, 0, 0.0, 0.0, 0.0, 10.0);
  VehicleState next = propagate(v, {0.0, kPi}, 0.1, *road);
  CHECK(next.pose.theta == doctest::Approx(0.1 * kPi).epsilon(1e-12));
  CHECK(next.pose.x == doctest::Approx(std::cos(0.1 * kPi)).epsilon(1e-12));
  CHECK(next.pose.y == doctest::Approx(std::sin(0.1 * kPi)).epsilon(1e-12));
}

TEST_CASE("propagate: zero action at rest is a fixed point") {
  auto road = straight_road();
  VehicleState v = make_vehicle(*road, 0, 12.0, 1.0, 0.25, 0.0);
  VehicleState next = propagate(v, {0.0, 0.0}, 0.1, *road);
  CHECK(next.pose.x == v.pose.x);
  CHECK(next.pose.y == v.pose.y);
  CHECK(next.pose.theta == v.pose.theta);
  CHECK(next.speed == v.speed);
  CHECK(next.lane_pos.s == v.lane_pos.s);
  CHECK(next.lane_pos.t == v.lane_pos.t);
}

TEST_CASE("propagate flags non-finite results") {
  auto road = straight_road();
  VehicleState v = make_vehicle(*road, 0, 0.0, 0.0, 0.0, 1.0);
  CHECK_THROWS_AS(propagate(v, {std::nan(""), 0.0}, 0.1, *road),
                  NonFiniteState);
}

TEST_CASE("step_scene: empty scene advances the step index") {
  Scene scene;
  scene.roadway = straight_road();
  Scene next = step_scene(scene, {}, SimConfig{});
  CHECK(next.step_index == 1);
  CHECK(next.vehicles.empty());
}

TEST_CASE("step_scene: two vehicles advance simultaneously") {
  auto road = straight_road();
  Scene scene;
  scene.roadway = road;
  scene.vehicles = {make_vehicle(*road, 1, 0.0, 0.0, 0.0, 10.0),
                    make_vehicle(*road, 2, 20.0, 3.6, 0.0, 20.0)};
  std::map<int, Action> actions{{1, {0, 0}}, {2, {0, 0}}};
  Scene next = step_scene(scene, actions, SimConfig{});
  CHECK(next.require(1).pose.x == doctest::Approx(1.0));
  CHECK(next.require(2).pose.x == doctest::Approx(22.0));
  CHECK(next.step_index == 1);
}

TEST_CASE("step_scene: missing action throws") {
  auto road = straight_road();
  Scene scene;
  scene.roadway = road;
  scene.vehicles = {make_vehicle(*road, 1, 0, 0, 0, 10)};
  CHECK_THROWS_AS(step_scene(scene, {}, SimConfig{}), MissingAction);
}

TEST_CASE("step_scene: insertion order of the action map is irrelevant") {
  auto road = straight_road();
  Scene scene;
  scene.roadway = road;
  for (int i = 0; i < 6; ++i)
    scene.vehicles.push_back(
        make_vehicle(*road, i, 10.0 * i, 3.6 * (i % 3), 0.0, 5.0 + i));

  std::map<int, Action> forward, reversed;
  for (int i = 0; i < 6; ++i) forward[i] = {0.1 * i, 0.01 * i};
  for (int i = 5; i >= 0; --i) reversed[i] = {0.1 * i, 0.01 * i};
  Scene a = step_scene(scene, forward, SimConfig{});
  Scene b = step_scene(scene, reversed, SimConfig{});
  for (int i = 0; i < 6; ++i) {
    CHECK(a.require(i).pose.x == b.require(i).pose.x);
    CHECK(a.require(i).pose.y == b.require(i).pose.y);
    CHECK(a.require(i).speed == b.require(i).speed);
  }
}

TEST_CASE("step_scene clamps actions to the configured bounds") {
  auto road = straight_road();
  Scene scene;
  scene.roadway = road;
  scene.vehicles = {make_vehicle(*road, 0, 0, 0, 0, 10)};
  SimConfig cfg;  // |a| <= 5, |omega| <= 0.5
  Scene next = step_scene(scene, {{0, {100.0, -100.0}}}, cfg);
  CHECK(next.require(0).last_action.accel == 5.0);
  CHECK(next.require(0).last_action.turn_rate == -0.5);
}

TEST_CASE("collisions: identical poses collide, distant vehicles do not") {
  auto road = straight_road();
  Scene scene;
  scene.roadway = road;
  scene.vehicles = {make_vehicle(*road, 1, 10, 0, 0, 0),
                    make_vehicle(*road, 2, 10, 0, 0, 0),
                    make_vehicle(*road, 3, 110, 0, 0, 0)};
  auto pairs = detect_collisions(scene);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0] == std::pair<int, int>{1, 2});
}

TEST_CASE("collisions: touching bumpers count (closed overlap)") {
  auto road = straight_road();
  Scene scene;
  scene.roadway = road;
  scene.vehicles = {make_vehicle(*road, 1, 0, 0, 0, 0),
                    make_vehicle(*road, 2, 4.5, 0, 0, 0)};
  auto pairs = detect_collisions(scene);
  REQUIRE(pairs.size() == 1);

  // separating-axis hand check: gap 4.5 equals the summed half lengths, so
  // the projections touch on the heading axis; any wider gap separates.
  scene.vehicles[1].pose.x = 4.5 + 1e-9;
  scene.vehicles[1].lane_pos = road->project(scene.vehicles[1].pose);
  CHECK(detect_collisions(scene).empty());
}

TEST_CASE("collision check is symmetric and skips self pairs") {
  auto road = straight_road();
  Scene scene;
  scene.roadway = road;
  scene.vehicles = {make_vehicle(*road, 5, 0, 0, 0.3, 0),
                    make_vehicle(*road, 2, 2.0, 0.5, -0.2, 0)};
  CHECK(rectangles_overlap(scene.vehicles[0].pose, scene.vehicles[0].shape,
                           scene.vehicles[1].pose, scene.vehicles[1].shape) ==
        rectangles_overlap(scene.vehicles[1].pose, scene.vehicles[1].shape,
                           scene.vehicles[0].pose, scene.vehicles[0].shape));
  auto pairs = detect_collisions(scene);
  for (auto [a, b] : pairs) CHECK(a != b);
}

TEST_CASE("distance to road edge") {
  auto road = straight_road(3, 3.6);
  // centered in the middle lane, body width 1.8
  VehicleState v = make_vehicle(*road, 0, 10, 3.6, 0, 0, {4.5, 1.8});
  CHECK(distance_to_road_edge(v, *road) == doctest::Approx(4.5).epsilon(1e-12));

  // body edge exactly on the left road edge: y = left_edge - width/2
  double left_edge = 2 * 3.6 + 1.8;
  VehicleState on_edge = make_vehicle(*road, 0, 10, left_edge - 0.9, 0, 0);
  CHECK(distance_to_road_edge(on_edge, *road) ==
        doctest::Approx(0.0).epsilon(1e-12));

  VehicleState beyond = make_vehicle(*road, 0, 10, left_edge - 0.9 + 0.2, 0, 0);
  CHECK(distance_to_road_edge(beyond, *road) ==
        doctest::Approx(-0.2).epsilon(1e-9));
}

TEST_CASE("leader lookup: single vehicle has no leader") {
  auto road = straight_road();
  Scene scene;
  scene.roadway = road;
  scene.vehicles = {make_vehicle(*road, 0, 10, 0, 0, 10)};
  CHECK(!leader_lookup(scene, 0, 0).has_value());
}

TEST_CASE("leader lookup: bumper gap and relative speed") {
  auto road = straight_road();
  Scene scene;
  scene.roadway = road;
  scene.vehicles = {make_vehicle(*road, 0, 10, 0, 0, 15, {4.0, 1.8}),
                    make_vehicle(*road, 1, 30, 0, 0, 15, {4.0, 1.8})};
  auto leader = leader_lookup(scene, 0, 0);
  REQUIRE(leader.has_value());
  CHECK(leader->id == 1);
  CHECK(leader->gap == doctest::Approx(16.0).epsilon(1e-12));
  CHECK(leader->closing_speed == doctest::Approx(0.0));
}

TEST_CASE("leader lookup wraps around the oval") {
  auto road = std::make_shared<RoadwayGeometry>(
      RoadwayGeometry::oval(100, 40, 1, 3.6));
  Scene scene;
  scene.roadway = road;
  auto place = [&](int id, double s, double v) {
    VehicleState veh;
    veh.id = id;
    veh.shape = {4.0, 1.8};
    veh.pose = road->lane_center_pose(0, s);
    veh.speed = v;
    veh.lane_pos = road->project(veh.pose, 1e18);
    scene.vehicles.push_back(veh);
  };
  double len = road->lane_length(0);
  place(0, len - 10.0, 20.0);  // ego near the wrap point
  place(1, 5.0, 18.0);         // behind in s, ahead through the wrap

  auto leader = leader_lookup(scene, 0, 0);
  REQUIRE(leader.has_value());
  CHECK(leader->id == 1);
  // brute-force oracle with modular arithmetic
  double expect_centers = std::fmod(5.0 - (len - 10.0) + len, len);
  CHECK(leader->gap == doctest::Approx(expect_centers - 4.0).epsilon(1e-9));
  CHECK(leader->closing_speed == doctest::Approx(-2.0));

  auto follower = follower_lookup(scene, 1, 0);
  REQUIRE(follower.has_value());
  CHECK(follower->id == 0);
}

TEST_CASE("min body distance matches the rectangle distance") {
  auto road = straight_road();
  Scene scene;
  scene.roadway = road;
  scene.vehicles = {make_vehicle(*road, 0, 0, 0, 0, 0, {4.0, 2.0}),
                    make_vehicle(*road, 1, 10, 0, 0, 0, {4.0, 2.0})};
  CHECK(min_body_distance(scene, 0) == doctest::Approx(6.0).epsilon(1e-9));
  scene.vehicles[1].pose.x = 3.0;
  CHECK(min_body_distance(scene, 0) == 0.0);
}

namespace {

// Fixed synthetic source for the sampling tests.
class FakeSource : public SceneSource {
 public:
  explicit FakeSource(RoadwayPtr road) : road_(std::move(road)) {}
  int64_t episode_count() const override { return 3; }
  int64_t episode_length(int64_t) const override { return 50; }
  int vehicle_count(int64_t) const override { return 4; }
  Scene scene_at(int64_t ep, int64_t step) const override {
    Scene s;
    s.roadway = road_;
    s.step_index = step;
    for (int i = 0; i < 4; ++i)
      s.vehicles.push_back(make_vehicle(
          *road_, i, 15.0 * i + static_cast<double>(ep + step), 0, 0, 10));
    return s;
  }

 private:
  RoadwayPtr road_;
};

}  // namespace

TEST_CASE("sample_initial_scene: controlled set size and determinism") {
  FakeSource source(straight_road());
  RngStream rng1(3), rng2(3);

  SampledScene a = sample_initial_scene(source, 2, 10, rng1);
  SampledScene b = sample_initial_scene(source, 2, 10, rng2);
  CHECK(a.episode == b.episode);
  CHECK(a.start_step == b.start_step);
  CHECK(a.controlled_ids == b.controlled_ids);
  CHECK(a.controlled_ids.size() == 2);

  RngStream rng3(4);
  SampledScene none = sample_initial_scene(source, 0, 10, rng3);
  CHECK(none.controlled_ids.empty());  // pure playback

  SampledScene all = sample_initial_scene(source, 4, 10, rng3);
  CHECK(all.controlled_ids.size() == 4);

  CHECK_THROWS_AS(sample_initial_scene(source, 5, 10, rng3),
                  InsufficientVehicles);
  CHECK_THROWS_AS(sample_initial_scene(source, 1, 51, rng3),
                  InsufficientVehicles);
}
