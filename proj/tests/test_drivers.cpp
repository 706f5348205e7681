#include <doctest.h>

#include <cmath>
#include <limits>

#include "dm/drivers.hpp"

using namespace dm;
using namespace dm::drivers;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

sim::RoadwayPtr straight_road(int lanes = 3) {
  return std::make_shared<sim::RoadwayGeometry>(
      sim::RoadwayGeometry::straight(640, lanes, 3.6));
}

sim::VehicleState vehicle(const sim::RoadwayGeometry& road, int id, int lane,
                          double s, double v) {
  sim::VehicleState veh;
  veh.id = id;
  veh.pose = road.lane_center_pose(lane, s);
  veh.speed = v;
  veh.shape = {4.5, 1.8};
  veh.lane_pos = road.project(veh.pose);
  return veh;
}

}  // namespace

TEST_CASE("desired gap formula") {
  IdmParams p;
  p.d_min = 2.0;
  p.time_headway = 1.0;
  p.a_max = 1.0;
  p.b_pref = 2.0;
  CHECK(desired_gap(0.0, 0.0, p) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(desired_gap(10.0, 0.0, p) == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(desired_gap(10.0, -2.0, p) ==
        doctest::Approx(12.0 + 20.0 / (2.0 * std::sqrt(2.0))).epsilon(1e-12));
  // opening fast: floored at d_min
  CHECK(desired_gap(10.0, 50.0, p) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("idm acceleration") {
  IdmParams p;
  p.v_des = 20.0;
  p.d_min = 2.0;
  p.time_headway = 1.0;
  p.a_max = 1.0;
  p.b_pref = 2.0;

  // free-flow equilibrium
  CHECK(idm_accel(20.0, 0.0, kInf, p) == doctest::Approx(0.0).epsilon(1e-12));
  // hand evaluation of the two equations
  CHECK(idm_accel(10.0, 0.0, 20.0, p) ==
        doctest::Approx(0.5775).epsilon(1e-12));
  // standstill on a free road
  CHECK(idm_accel(0.0, 0.0, 1e9, p) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(idm_accel(10.0, 0.0, 0.0, p), NonPositiveGap);
  CHECK_THROWS_AS(idm_accel(10.0, 0.0, -1.0, p), NonPositiveGap);
  // hard clamp
  CHECK(idm_accel(10.0, -30.0, 0.5, p) == doctest::Approx(-9.0));
}

TEST_CASE("idm monotonicity in speed and gap") {
  IdmParams p;
  p.v_des = 30.0;
  for (double r : {-3.0, 0.0, 3.0}) {
    double prev = kInf;
    for (double v = 0.0; v <= 40.0; v += 2.0) {
      double a = idm_accel(v, r, 50.0, p);
      CHECK(a <= prev + 1e-12);
      prev = a;
    }
    prev = -kInf;
    for (double d = 5.0; d <= 200.0; d += 5.0) {
      double a = idm_accel(15.0, r, d, p);
      CHECK(a >= prev - 1e-12);
      prev = a;
    }
  }
}

TEST_CASE("mobil: lone vehicle keeps its lane") {
  auto road = straight_road();
  sim::Scene scene;
  scene.roadway = road;
  scene.vehicles = {vehicle(*road, 0, 1, 50, 25)};
  CHECK(mobil_decide_lane(scene, 0, MobilParams{}, IdmParams{}) == 1);
}

TEST_CASE("mobil: slow leader and an empty lane trigger a change") {
  auto road = straight_road();
  sim::Scene scene;
  scene.roadway = road;
  scene.vehicles = {vehicle(*road, 0, 0, 50, 25),
                    vehicle(*road, 1, 0, 70, 8)};  // crawling leader
  MobilParams mp;
  mp.politeness = 0.0;
  mp.accel_gain_threshold = 0.1;
  IdmParams idm;
  idm.v_des = 30.0;
  int lane = mobil_decide_lane(scene, 0, mp, idm);
  CHECK(lane == 1);

  // oracle: explicit evaluation of the two ego accelerations
  auto lead = sim::leader_lookup(scene, 0, 0);
  double before = idm_accel(25.0, lead->closing_speed, lead->gap, idm);
  double after = idm_accel(25.0, 0.0, kInf, idm);
  CHECK(after - before > mp.accel_gain_threshold);
}

TEST_CASE("mobil: unsafe new follower vetoes the change") {
  auto road = straight_road();
  sim::Scene scene;
  scene.roadway = road;
  scene.vehicles = {vehicle(*road, 0, 0, 50, 10),
                    vehicle(*road, 1, 0, 70, 2),     // slow leader
                    vehicle(*road, 2, 1, 44, 35)};   // fast follower beside
  MobilParams mp;
  mp.politeness = 0.0;
  mp.b_safe = 4.0;
  IdmParams idm;
  idm.v_des = 35.0;
  CHECK(mobil_decide_lane(scene, 0, mp, idm) == 0);

  // oracle: the prospective follower's deceleration breaches -b_safe
  double gap = (50.0 - 44.0) - 4.5;
  double a_follower = idm_accel(35.0, 10.0 - 35.0, gap, idm);
  CHECK(a_follower < -mp.b_safe);
}

TEST_CASE("mobil with politeness 1 never lowers the summed gain") {
  auto road = straight_road();
  RngStream rng(21);
  MobilParams mp;
  mp.politeness = 1.0;
  mp.accel_gain_threshold = 0.0;
  IdmParams idm;
  idm.v_des = 30.0;

  for (int trial = 0; trial < 60; ++trial) {
    sim::Scene scene;
    scene.roadway = road;
    int n = 5;
    for (int i = 0; i < n; ++i) {
      scene.vehicles.push_back(
          vehicle(*road, i, static_cast<int>(rng.uniform_int(0, 2)),
                  rng.uniform(0, 300), rng.uniform(5, 30)));
    }
    bool overlap = !sim::detect_collisions(scene).empty();
    if (overlap) continue;

    auto total_gain = [&](int ego, int lane) {
      // summed IDM delta of ego + affected followers if ego sat in `lane`
      auto accel_of = [&](int id, int in_lane,
                          const sim::Scene& sc) -> double {
        auto lead = sim::leader_lookup(sc, id, in_lane);
        if (lead && lead->gap <= 0) return -9.0;
        return idm_accel(sc.require(id).speed,
                         lead ? lead->closing_speed : 0.0,
                         lead ? lead->gap : kInf, idm);
      };
      sim::Scene moved = scene;
      auto& ego_state = *moved.find(ego);
      sim::LanePosition lp = road->project_to_lane(ego_state.pose, lane);
      ego_state.pose = road->pose_from(lp);
      ego_state.lane_pos = road->project(ego_state.pose);
      double total = accel_of(ego, lane, moved);
      for (const auto& v : moved.vehicles) {
        if (v.id == ego) continue;
        total += accel_of(v.id, v.lane_pos.lane, moved);
      }
      return total;
    };

    int ego = 0;
    int current = scene.require(ego).lane_pos.lane;
    int chosen = mobil_decide_lane(scene, ego, mp, idm);
    if (chosen != current) {
      CHECK(total_gain(ego, chosen) >= total_gain(ego, current) - 1e-9);
    }
  }
}

TEST_CASE("lane tracker turn rate") {
  auto road = straight_road();
  LaneTrackerParams p;
  p.k_offset = 0.5;
  p.k_heading = 1.0;

  sim::VehicleState on_center = vehicle(*road, 0, 1, 50, 20);
  CHECK(lane_track_turnrate(on_center, 1, p, *road, 0.5) ==
        doctest::Approx(0.0).epsilon(1e-12));

  sim::VehicleState offset = on_center;
  offset.pose.y += 1.0;  // t = +1 relative to lane 1
  CHECK(lane_track_turnrate(offset, 1, p, *road, 2.0) ==
        doctest::Approx(-0.5).epsilon(1e-12));

  sim::VehicleState mixed = on_center;
  mixed.pose.y -= 1.0;
  mixed.pose.theta = 0.2;
  CHECK(lane_track_turnrate(mixed, 1, p, *road, 2.0) ==
        doctest::Approx(0.5 - 0.2).epsilon(1e-12));
  // clamped to the bound
  CHECK(lane_track_turnrate(mixed, 1, p, *road, 0.25) == doctest::Approx(0.25));
}

TEST_CASE("rule policy: free road at v_des with zero noise is (0, 0)") {
  auto road = straight_road();
  sim::Scene scene;
  scene.roadway = road;
  scene.vehicles = {vehicle(*road, 0, 1, 50, 25)};

  StyleLibrary lib = StyleLibrary::defaults();
  lib.noise = {0.0, 0.0};
  RngStream rng(5);
  StyleInstance inst = spawn_style(lib, StyleClass::Passive, 1, rng);
  inst.idm.v_des = 25.0;  // pin the sampled desired speed
  sim::Action a = rule_policy_action(scene, 0, inst, 0.1, 0.5, rng);
  CHECK(a.accel == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(a.turn_rate == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("rule policy is deterministic under a fixed seed") {
  auto road = straight_road();
  sim::Scene scene;
  scene.roadway = road;
  scene.vehicles = {vehicle(*road, 0, 1, 50, 20), vehicle(*road, 1, 1, 80, 15)};
  StyleLibrary lib = StyleLibrary::defaults();

  auto run = [&]() {
    RngStream rng(17);
    StyleInstance inst = spawn_style(lib, StyleClass::Aggressive, 1, rng);
    return rule_policy_action(scene, 0, inst, 0.1, 0.5, rng);
  };
  sim::Action a = run(), b = run();
  CHECK(a.accel == b.accel);
  CHECK(a.turn_rate == b.turn_rate);
}

TEST_CASE("rule policy noise has the configured spread") {
  auto road = straight_road();
  sim::Scene scene;
  scene.roadway = road;
  scene.vehicles = {vehicle(*road, 0, 1, 50, 25)};
  StyleLibrary lib = StyleLibrary::defaults();
  lib.noise = {0.1, 0.0};
  RngStream rng(23);
  StyleInstance inst = spawn_style(lib, StyleClass::Passive, 1, rng);
  inst.idm.v_des = 25.0;

  const int n = 100000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    inst.cooldown_left = 1.0;  // hold the lane decision fixed
    double a = rule_policy_action(scene, 0, inst, 0.1, 0.5, rng).accel;
    sum += a;
    sq += a * a;
  }
  double mean = sum / n;
  double std = std::sqrt(sq / n - mean * mean);
  CHECK(std == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("static gaussian fit: degenerate and two-cluster data") {
  std::vector<Eigen::Vector2d> zeros(10, Eigen::Vector2d::Zero());
  StaticGaussianModel m = fit_static_gaussian(zeros);
  CHECK(m.mu.norm() == doctest::Approx(0.0));
  CHECK(m.sigma(0, 0) == doctest::Approx(1e-8).epsilon(1e-9));
  CHECK(m.sigma(1, 1) == doctest::Approx(1e-8).epsilon(1e-9));

  std::vector<Eigen::Vector2d> clusters;
  for (int i = 0; i < 50; ++i) {
    clusters.emplace_back(1.0, 0.0);
    clusters.emplace_back(-1.0, 0.0);
  }
  StaticGaussianModel c = fit_static_gaussian(clusters);
  CHECK(c.mu[0] == doctest::Approx(0.0));
  CHECK(c.sigma(0, 0) == doctest::Approx(1.0).epsilon(1e-6));

  std::vector<Eigen::Vector2d> two(2, Eigen::Vector2d::Zero());
  CHECK_THROWS_AS(fit_static_gaussian(two), InsufficientData);
}

TEST_CASE("static gaussian fit maximizes the training likelihood") {
  RngStream rng(31);
  std::vector<Eigen::Vector2d> data;
  for (int i = 0; i < 400; ++i)
    data.emplace_back(0.3 + 0.7 * rng.normal(), -0.2 + 0.4 * rng.normal());
  StaticGaussianModel fit = fit_static_gaussian(data);

  auto total_ll = [&](const Eigen::Vector2d& mu) {
    StaticGaussianModel m = fit;
    m.mu = mu;
    double ll = 0;
    for (const auto& a : data) ll += static_gaussian_log_likelihood(m, a);
    return ll;
  };
  double best = total_ll(fit.mu);
  for (double dx : {-0.2, -0.05, 0.05, 0.2}) {
    for (double dy : {-0.2, -0.05, 0.05, 0.2}) {
      CHECK(total_ll(fit.mu + Eigen::Vector2d(dx, dy)) <= best + 1e-9);
    }
  }
}

TEST_CASE("platoon of identical idm drivers settles without collisions") {
  auto road = std::make_shared<sim::RoadwayGeometry>(
      sim::RoadwayGeometry::oval(100, 40, 1, 3.6));
  StyleLibrary lib = StyleLibrary::defaults();
  lib.noise = {0.0, 0.0};

  sim::Scene scene;
  scene.roadway = road;
  const int n = 8;
  double len = road->lane_length(0);
  std::vector<StyleInstance> drivers;
  RngStream rng(3);
  for (int i = 0; i < n; ++i) {
    sim::VehicleState v;
    v.id = i;
    v.shape = {4.5, 1.8};
    v.pose = road->lane_center_pose(0, len * i / n);
    v.speed = 15.0;
    v.lane_pos = road->project(v.pose);
    scene.vehicles.push_back(v);
    StyleInstance inst = spawn_style(lib, StyleClass::Passive, 0, rng);
    inst.idm.v_des = 25.0;
    drivers.push_back(inst);
  }

  sim::SimConfig cfg;
  for (int step = 0; step < 600; ++step) {  // 60 simulated seconds
    std::map<int, sim::Action> actions;
    for (int i = 0; i < n; ++i) {
      actions[i] = rule_policy_action(scene, i, drivers[static_cast<size_t>(i)],
                                      cfg.dt, cfg.turn_rate_bound, rng);
    }
    scene = step_scene(scene, actions, cfg);
    CHECK(sim::detect_collisions(scene).empty());
  }
  double mean = 0;
  for (const auto& v : scene.vehicles) mean += v.speed;
  mean /= n;
  double var = 0;
  for (const auto& v : scene.vehicles) var += (v.speed - mean) * (v.speed - mean);
  var /= n;
  CHECK(var < 1e-3);
}
