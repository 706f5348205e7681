#include "dm/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "dm/plots.hpp"

namespace dm::io {

namespace {

std::string g10(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& body) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + tmp.string());
    os << body;
  }
  std::filesystem::rename(tmp, path);
}

drivers::StyleClass draw_style(const std::array<double, 4>& mix,
                               RngStream& rng) {
  double u = rng.uniform();
  double acc = 0;
  for (int i = 0; i < drivers::kStyleCount; ++i) {
    acc += mix[static_cast<size_t>(i)];
    if (u < acc) return static_cast<drivers::StyleClass>(i);
  }
  return drivers::StyleClass::Tailgater;
}

}  // namespace

TrajectoryEpisode generate_episode(const RunConfig& cfg,
                                   sim::RoadwayPtr roadway, int64_t episode_id,
                                   int steps, RngStream& rng) {
  const auto& road = *roadway;
  int lanes = road.lane_count();
  int n = cfg.demos.vehicles;

  sim::Scene scene;
  scene.roadway = roadway;
  std::map<int, drivers::StyleInstance> controllers;
  std::map<int, drivers::StyleClass> styles;

  // Sequential spawning per lane, rear to front. Each new vehicle is placed
  // far enough behind its leader that its own IDM desired gap is met at the
  // spawn speed, so recordings start near car-following equilibrium.
  std::vector<double> next_s(static_cast<size_t>(lanes));
  for (int l = 0; l < lanes; ++l)
    next_s[static_cast<size_t>(l)] = rng.uniform(0.0, 10.0);
  sim::Shape shape;  // uniform car body
  for (int i = 0; i < n; ++i) {
    int lane = i % lanes;
    drivers::StyleClass style = cfg.demos.styled
                                    ? draw_style(cfg.styles.mix, rng)
                                    : drivers::StyleClass::Passive;
    drivers::StyleInstance inst =
        drivers::spawn_style(cfg.styles.library, style, lane, rng);
    double speed = inst.idm.v_des * rng.uniform(0.8, 0.95);
    double gap = shape.length + drivers::desired_gap(speed, 0.0, inst.idm) +
                 rng.uniform(0.0, 15.0);

    double s = next_s[static_cast<size_t>(lane)];
    next_s[static_cast<size_t>(lane)] = s + gap;
    double limit =
        road.is_closed() ? road.lane_length(lane) : cfg.roadway.length;
    if (s > limit - shape.length) continue;  // lane is full, skip the slot

    sim::VehicleState v;
    v.id = i;
    v.shape = shape;
    v.pose = road.lane_center_pose(lane, s);
    v.speed = speed;
    v.lane_pos = road.project(v.pose);
    scene.vehicles.push_back(v);
    controllers.emplace(v.id, std::move(inst));
    styles.emplace(v.id, style);
  }
  if (scene.vehicles.empty())
    throw InsufficientVehicles("no vehicles could be spawned");

  sim::SimConfig sim_cfg = cfg.roadway.sim;
  auto drive_step = [&]() {
    std::map<int, sim::Action> actions;
    for (const auto& v : scene.vehicles) {
      actions[v.id] = drivers::rule_policy_action(
          scene, v.id, controllers.at(v.id), sim_cfg.dt,
          sim_cfg.turn_rate_bound, rng);
      actions[v.id] = sim::clamp_action(actions[v.id], sim_cfg);
    }
    return actions;
  };

  for (int w = 0; w < cfg.demos.warmup_steps; ++w)
    scene = sim::step_scene(scene, drive_step(), sim_cfg);
  scene.step_index = 0;

  TrajectoryEpisode ep;
  ep.id = episode_id;
  std::map<int, size_t> track_of;
  for (const auto& v : scene.vehicles) {
    VehicleTrack tr;
    tr.id = v.id;
    tr.shape = v.shape;
    if (cfg.demos.styled) tr.style = styles.at(v.id);
    track_of[v.id] = ep.vehicles.size();
    ep.vehicles.push_back(std::move(tr));
  }

  for (int step = 0; step < steps; ++step) {
    std::map<int, sim::Action> actions = drive_step();
    for (const auto& v : scene.vehicles) {
      VehicleTrack& tr = ep.vehicles[track_of.at(v.id)];
      const sim::Action& a = actions.at(v.id);
      tr.x.push_back(v.pose.x);
      tr.y.push_back(v.pose.y);
      tr.theta.push_back(v.pose.theta);
      tr.v.push_back(v.speed);
      tr.lane.push_back(v.lane_pos.lane);
      tr.s.push_back(v.lane_pos.s);
      tr.t.push_back(v.lane_pos.t);
      tr.phi.push_back(v.lane_pos.phi);
      tr.a.push_back(a.accel);
      tr.omega.push_back(a.turn_rate);
    }
    scene = sim::step_scene(scene, actions, sim_cfg);
  }
  return ep;
}

void cmd_gen_demos(const RunConfig& cfg, const std::filesystem::path& out_dir,
                   uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  sim::RoadwayPtr roadway = cfg.roadway.build();

  auto generate_split = [&](const char* stream, int episodes, int steps,
                            const std::filesystem::path& path) {
    std::vector<TrajectoryEpisode> eps;
    for (int e = 0; e < episodes; ++e) {
      RngStream rng =
          RngStream::substream(seed, stream, static_cast<uint64_t>(e));
      eps.push_back(generate_episode(cfg, roadway, e, steps, rng));
    }
    write_trajectory_csv(path, TrajectoryData(roadway, std::move(eps)));
  };
  generate_split("demos_train", cfg.demos.episodes, cfg.demos.steps,
                 out_dir / "train.csv");
  generate_split("demos_val", cfg.demos.val_episodes, cfg.demos.val_steps,
                 out_dir / "val.csv");
}

namespace {

train::TrainerSetup make_setup(const RunConfig& cfg,
                               const std::string& algorithm,
                               const TrajectoryData& demos,
                               const std::filesystem::path& out_dir,
                               uint64_t seed, bool resume) {
  train::TrainerSetup setup;
  setup.demos = &demos;
  setup.env = cfg.env_config();
  setup.arch = cfg.policy;
  setup.phases = cfg.trainer.phases;
  setup.curriculum = cfg.trainer.curriculum;
  setup.penalty = cfg.trainer.penalty;
  setup.info = cfg.trainer.info;
  setup.trpo_cfg = cfg.trpo.trpo;
  setup.vf_fit = cfg.trpo.vf_fit;
  setup.critic_cfg = cfg.critic;
  setup.master_seed = seed;
  setup.out_dir = out_dir;
  setup.checkpoint_period = cfg.trainer.checkpoint_period;
  setup.resume = resume;
  setup.norm_sample = cfg.trainer.norm_sample;
  setup.algo_name = algorithm;
  setup.config_hash = cfg.hash();

  if (algorithm == "gail") {
    setup.algo.fixed_agents = 1;
  } else if (algorithm == "psgail") {
    setup.algo.use_curriculum = true;
  } else if (algorithm == "rail") {
    setup.algo.use_curriculum = true;
    setup.algo.penalty_enabled = true;
  } else if (algorithm == "infogail") {
    setup.algo.info_enabled = true;
    setup.algo.fixed_agents = 1;
    setup.arch.latent.enabled = true;
  } else if (algorithm == "burn") {
    setup.algo.info_enabled = true;
    setup.algo.burn_in = true;
    setup.algo.fixed_agents = 1;
    setup.arch.latent.enabled = true;
  } else {
    throw ConfigError("unknown algorithm '" + algorithm + "'");
  }
  return setup;
}

void write_bc_outputs(const RunConfig& cfg,
                      const std::vector<train::BcRecord>& records,
                      const policy::GaussianPolicy& policy,
                      const std::filesystem::path& out_dir, uint64_t seed) {
  std::string metrics = "epoch,train_nll,val_nll\n";
  for (const auto& r : records) {
    metrics += std::to_string(r.epoch);
    metrics += "," + g10(r.train_nll) + "," + g10(r.val_nll) + "\n";
  }
  atomic_write(out_dir / "metrics.csv", metrics);

  nlohmann::json meta = {{"algorithm", "bc"},
                         {"master_seed", seed},
                         {"config_hash", cfg.hash()}};
  feat::ObservationLayout layout =
      feat::ObservationLayout::from_config(cfg.features);
  nn::write_checkpoint_file(
      out_dir / "checkpoint_final.dmck",
      policy::policy_to_checkpoint(policy, layout, meta));
}

void write_manifest(const RunConfig& cfg, const std::string& algorithm,
                    const std::filesystem::path& out_dir, uint64_t seed) {
  nlohmann::json manifest = {{"algorithm", algorithm},
                             {"master_seed", seed},
                             {"config_hash", cfg.hash()},
                             {"revision", "drivemimic-0.1.0"}};
  atomic_write(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace

void cmd_train(const RunConfig& cfg, const std::string& algorithm,
               const std::filesystem::path& demos_csv,
               const std::filesystem::path& out_dir, uint64_t seed,
               bool resume) {
  bool known = false;
  for (const char* name : kAlgoNames) known = known || algorithm == name;
  if (!known) throw ConfigError("unknown algorithm '" + algorithm + "'");

  std::filesystem::create_directories(out_dir);
  TrajectoryData demos = read_trajectory_csv(demos_csv, cfg.roadway.build());

  if (algorithm == "bc") {
    write_manifest(cfg, algorithm, out_dir, seed);
    ExpertDataset dataset(demos, cfg.features);
    feat::ObservationLayout layout =
        feat::ObservationLayout::from_config(cfg.features);
    policy::GaussianPolicy policy(cfg.policy, layout.total, seed);
    auto records = train::train_bc(policy, dataset, cfg.trainer.bc, seed);
    write_bc_outputs(cfg, records, policy, out_dir, seed);
    return;
  }

  if (algorithm == "sg") {
    write_manifest(cfg, algorithm, out_dir, seed);
    std::vector<Eigen::Vector2d> actions;
    for (const auto& ep : demos.episodes()) {
      for (const auto& tr : ep.vehicles) {
        for (size_t i = 0; i < tr.a.size(); ++i)
          actions.emplace_back(tr.a[i], tr.omega[i]);
      }
    }
    drivers::StaticGaussianModel model = drivers::fit_static_gaussian(actions);
    nn::Checkpoint ckpt;
    ckpt.metadata = {{"kind", "static_gaussian"},
                     {"algorithm", "sg"},
                     {"master_seed", seed},
                     {"config_hash", cfg.hash()}};
    nn::Tensor mu(1, 2), sigma(2, 2);
    mu[0] = model.mu[0];
    mu[1] = model.mu[1];
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) sigma(r, c) = model.sigma(r, c);
    ckpt.tensors.emplace_back("sg/mu", std::move(mu));
    ckpt.tensors.emplace_back("sg/sigma", std::move(sigma));
    nn::write_checkpoint_file(out_dir / "checkpoint_final.dmck", ckpt);
    atomic_write(out_dir / "metrics.csv", "samples\n" +
                                              std::to_string(actions.size()) +
                                              "\n");
    return;
  }

  train::TrainerSetup setup =
      make_setup(cfg, algorithm, demos, out_dir, seed, resume);
  train::AdversarialTrainer trainer(std::move(setup));
  trainer.run();

  // Fold the encoder into the final checkpoint so evaluation can infer
  // latent codes from burn-in segments.
  if (trainer.q_network()) {
    nn::Checkpoint ckpt = trainer.policy_checkpoint();
    ckpt.metadata["encoder"] = {
        {"code_count", trainer.q_network()->code_count()},
        {"gru_units", cfg.trainer.info.gru_units},
    };
    for (const auto& [name, t] : trainer.q_network()->params().items())
      ckpt.tensors.emplace_back("qnet/" + name, t);
    const auto& qn = trainer.q_network()->normalization();
    nn::Tensor mean(1, static_cast<int64_t>(qn.mean.size()));
    nn::Tensor std_(1, static_cast<int64_t>(qn.std.size()));
    for (size_t i = 0; i < qn.mean.size(); ++i) {
      mean[static_cast<int64_t>(i)] = qn.mean[i];
      std_[static_cast<int64_t>(i)] = qn.std[i];
    }
    ckpt.tensors.emplace_back("qnorm/mean", std::move(mean));
    ckpt.tensors.emplace_back("qnorm/std", std::move(std_));
    nn::write_checkpoint_file(out_dir / "checkpoint_final.dmck", ckpt);
  }
}

namespace {

std::unique_ptr<train::QNetwork> encoder_from_checkpoint(
    const nn::Checkpoint& ckpt, int obs_dim) {
  if (!ckpt.metadata.contains("encoder")) return nullptr;
  const auto& enc = ckpt.metadata.at("encoder");
  auto q = std::make_unique<train::QNetwork>(
      obs_dim, enc.at("code_count").get<int>(),
      enc.at("gru_units").get<int64_t>(), 0);
  for (auto& [name, t] : q->params().items()) {
    const nn::Tensor* stored = ckpt.find("qnet/" + name);
    if (!stored || !stored->same_shape(t))
      throw VersionMismatch("encoder tensors missing from checkpoint");
    t = *stored;
  }
  const nn::Tensor* mean = ckpt.find("qnorm/mean");
  const nn::Tensor* std_ = ckpt.find("qnorm/std");
  if (!mean || !std_)
    throw VersionMismatch("encoder normalization missing from checkpoint");
  policy::InputNormalization norm;
  norm.mean.assign(mean->data(), mean->data() + mean->size());
  norm.std.assign(std_->data(), std_->data() + std_->size());
  q->set_normalization(std::move(norm));
  return q;
}

}  // namespace

void cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
              const std::filesystem::path& demos_csv,
              const std::filesystem::path& out_dir, uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  TrajectoryData demos = read_trajectory_csv(demos_csv, cfg.roadway.build());
  feat::ObservationLayout layout =
      feat::ObservationLayout::from_config(cfg.features);

  nn::Checkpoint ckpt = nn::read_checkpoint_file(checkpoint);
  std::string kind = ckpt.metadata.value("kind", "");

  std::unique_ptr<policy::GaussianPolicy> policy;
  std::unique_ptr<train::QNetwork> encoder;
  drivers::StaticGaussianModel sg;
  eval::PolicyVariant variant;

  if (kind == "gaussian_policy") {
    policy = std::make_unique<policy::GaussianPolicy>(
        policy::policy_from_checkpoint(ckpt, layout));
    encoder = encoder_from_checkpoint(ckpt, layout.total);
    variant = policy.get();
  } else if (kind == "static_gaussian") {
    const nn::Tensor* mu = ckpt.find("sg/mu");
    const nn::Tensor* sigma = ckpt.find("sg/sigma");
    if (!mu || !sigma) throw CorruptCheckpoint("static gaussian tensors missing");
    sg.mu = {(*mu)[0], (*mu)[1]};
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) sg.sigma(r, c) = (*sigma)(r, c);
    variant = &sg;
  } else {
    throw VersionMismatch("checkpoint kind '" + kind + "' cannot be evaluated");
  }

  eval::EvalConfig ecfg = cfg.eval;
  ecfg.master_seed = seed;
  train::EnvConfig env_cfg = cfg.env_config();
  env_cfg.others = train::OtherVehicleMode::Playback;

  eval::RolloutSet rollouts =
      eval::rollout_eval(variant, demos, env_cfg, ecfg, encoder.get());
  eval::write_rollouts_csv(out_dir / "rollouts.csv", rollouts);

  eval::RmseCurves curves = eval::rmse_curves(rollouts);
  std::string rmse = "step,seconds,rmse_position,rmse_speed,rmse_lane_offset\n";
  std::vector<double> seconds(curves.position.size());
  for (size_t h = 0; h < curves.position.size(); ++h) {
    seconds[h] = (static_cast<double>(h) + 1.0) * rollouts.dt;
    rmse += std::to_string(h + 1) + "," + g10(seconds[h]) + "," +
            g10(curves.position[h]) + "," + g10(curves.speed[h]) + "," +
            g10(curves.lane_offset[h]) + "\n";
  }
  atomic_write(out_dir / "rmse.csv", rmse);

  eval::EventMetrics events = eval::undesirable_rates(rollouts);
  atomic_write(out_dir / "events.csv",
               "collision_rate,offroad_duration_s,hard_brake_rate\n" +
                   g10(events.collision_rate) + "," +
                   g10(events.offroad_duration) + "," +
                   g10(events.hard_brake_rate) + "\n");

  plots::write_line_chart(
      out_dir / "rmse_position.svg", "Position RMSE", "horizon [s]", "RMSE [m]",
      {{"position", seconds, curves.position}});
  plots::write_line_chart(
      out_dir / "rmse_speed.svg", "Speed RMSE", "horizon [s]", "RMSE [m/s]",
      {{"speed", seconds, curves.speed}});
  plots::write_line_chart(
      out_dir / "rmse_lane_offset.svg", "Lane offset RMSE", "horizon [s]",
      "RMSE [m]", {{"lane offset", seconds, curves.lane_offset}});
  plots::write_bar_chart(
      out_dir / "events.svg", "Undesirable events",
      {"collision rate", "offroad duration [s]", "hard brake rate"},
      {{"policy",
        {events.collision_rate, events.offroad_duration,
         events.hard_brake_rate}}});

  if (ecfg.agent_counts.size() > 1) {
    std::vector<eval::ScalingRow> rows =
        eval::scaling_study(variant, demos, env_cfg, ecfg);
    std::string scaling = "agent_count,mean_position_rmse\n";
    std::vector<double> xs, ys;
    for (const auto& row : rows) {
      scaling += std::to_string(row.agent_count) + "," +
                 g10(row.mean_position_rmse) + "\n";
      xs.push_back(row.agent_count);
      ys.push_back(row.mean_position_rmse);
    }
    atomic_write(out_dir / "scaling.csv", scaling);
    plots::write_line_chart(out_dir / "scaling.svg",
                            "Average position RMSE vs controlled agents",
                            "controlled agents", "mean RMSE [m]",
                            {{"policy", xs, ys}});
  }

  if (encoder) {
    ExpertDataset dataset(demos, cfg.features);
    bool labeled = false;
    for (const auto& trk : dataset.tracks())
      labeled = labeled || demos.style_of(trk.episode, trk.vehicle_id).has_value();
    if (labeled) {
      eval::StyleAccuracy acc = eval::style_accuracy(
          *encoder, dataset, cfg.trainer.info.burn_in_length);
      atomic_write(out_dir / "style.csv",
                   "accuracy,ci_low,ci_high,count\n" + g10(acc.accuracy) + "," +
                       g10(acc.ci_low) + "," + g10(acc.ci_high) + "," +
                       std::to_string(acc.count) + "\n");
    }
  }

  nlohmann::json manifest = {{"checkpoint", checkpoint.string()},
                             {"master_seed", seed},
                             {"config_hash", cfg.hash()}};
  atomic_write(out_dir / "eval_manifest.json", manifest.dump(2) + "\n");
}

void cmd_report(const std::vector<std::filesystem::path>& run_dirs,
                const std::filesystem::path& out_dir) {
  if (run_dirs.empty()) throw MissingReport("no run directories given");
  std::filesystem::create_directories(out_dir);

  struct Run {
    std::string name;
    std::vector<double> seconds, pos, speed, offset;
    bool has_rmse = false;
    eval::EventMetrics events;
    bool has_events = false;
    std::vector<double> scale_x, scale_y;
  };
  std::vector<Run> runs;
  bool any_report = false;

  for (const auto& dir : run_dirs) {
    Run run;
    run.name = dir.filename().string();
    std::filesystem::path manifest = dir / "manifest.json";
    if (!std::filesystem::exists(manifest))
      manifest = dir / "eval_manifest.json";
    if (std::filesystem::exists(manifest)) {
      std::ifstream is(manifest);
      auto j = nlohmann::json::parse(is, nullptr, false);
      if (!j.is_discarded() && j.contains("algorithm"))
        run.name += " (" + j.at("algorithm").get<std::string>() + ")";
    }

    std::filesystem::path rmse = dir / "rmse.csv";
    if (std::filesystem::exists(rmse)) {
      std::ifstream is(rmse);
      std::string line;
      std::getline(is, line);
      while (std::getline(is, line)) {
        double step, sec, p, v, t;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &step, &sec, &p,
                        &v, &t) == 5) {
          run.seconds.push_back(sec);
          run.pos.push_back(p);
          run.speed.push_back(v);
          run.offset.push_back(t);
        }
      }
      run.has_rmse = !run.seconds.empty();
    }
    if (!run.has_rmse)
      std::cerr << "warning: " << dir << " has no rmse.csv; series omitted\n";

    std::filesystem::path events = dir / "events.csv";
    if (std::filesystem::exists(events)) {
      std::ifstream is(events);
      std::string line;
      std::getline(is, line);
      if (std::getline(is, line)) {
        run.has_events =
            std::sscanf(line.c_str(), "%lf,%lf,%lf", &run.events.collision_rate,
                        &run.events.offroad_duration,
                        &run.events.hard_brake_rate) == 3;
      }
    }
    if (!run.has_events)
      std::cerr << "warning: " << dir << " has no events.csv; series omitted\n";

    std::filesystem::path scaling = dir / "scaling.csv";
    if (std::filesystem::exists(scaling)) {
      std::ifstream is(scaling);
      std::string line;
      std::getline(is, line);
      while (std::getline(is, line)) {
        double count, v;
        if (std::sscanf(line.c_str(), "%lf,%lf", &count, &v) == 2) {
          run.scale_x.push_back(count);
          run.scale_y.push_back(v);
        }
      }
    }
    any_report = any_report || run.has_rmse || run.has_events;
    runs.push_back(std::move(run));
  }
  if (!any_report)
    throw MissingReport("none of the run directories holds a report");

  auto line_plot = [&](const char* file, const char* title, const char* ylabel,
                       auto getter) {
    std::vector<plots::Series> series;
    for (const Run& run : runs) {
      if (!run.has_rmse) continue;
      series.push_back({run.name, run.seconds, getter(run)});
    }
    if (!series.empty())
      plots::write_line_chart(out_dir / file, title, "horizon [s]", ylabel,
                              series);
  };
  line_plot("rmse_position.svg", "Position RMSE", "RMSE [m]",
            [](const Run& r) { return r.pos; });
  line_plot("rmse_speed.svg", "Speed RMSE", "RMSE [m/s]",
            [](const Run& r) { return r.speed; });
  line_plot("rmse_lane_offset.svg", "Lane offset RMSE", "RMSE [m]",
            [](const Run& r) { return r.offset; });

  {
    std::string csv = "run,horizon_s,rmse_position,rmse_speed,rmse_lane_offset\n";
    for (const Run& run : runs) {
      if (!run.has_rmse) continue;
      for (size_t h = 0; h < run.seconds.size(); ++h) {
        csv += run.name + "," + g10(run.seconds[h]) + "," + g10(run.pos[h]) +
               "," + g10(run.speed[h]) + "," + g10(run.offset[h]) + "\n";
      }
    }
    atomic_write(out_dir / "rmse_combined.csv", csv);
  }

  {
    std::vector<plots::BarGroup> groups;
    std::string csv = "run,collision_rate,offroad_duration_s,hard_brake_rate\n";
    for (const Run& run : runs) {
      if (!run.has_events) continue;
      groups.push_back({run.name,
                        {run.events.collision_rate, run.events.offroad_duration,
                         run.events.hard_brake_rate}});
      csv += run.name + "," + g10(run.events.collision_rate) + "," +
             g10(run.events.offroad_duration) + "," +
             g10(run.events.hard_brake_rate) + "\n";
    }
    if (!groups.empty()) {
      plots::write_bar_chart(
          out_dir / "events.svg", "Undesirable events",
          {"collision rate", "offroad duration [s]", "hard brake rate"},
          groups);
      atomic_write(out_dir / "events_combined.csv", csv);
    }
  }

  {
    std::vector<plots::Series> series;
    for (const Run& run : runs) {
      if (run.scale_x.empty()) continue;
      series.push_back({run.name, run.scale_x, run.scale_y});
    }
    if (!series.empty())
      plots::write_line_chart(out_dir / "scaling.svg",
                              "Average position RMSE vs controlled agents",
                              "controlled agents", "mean RMSE [m]", series);
  }
}

}  // namespace dm::io
