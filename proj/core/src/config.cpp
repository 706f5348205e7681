#include "dm/config.hpp"

#include <fstream>
#include <set>

namespace dm::io {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError("config section '" + section + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in section '" +
                        section + "'");
  }
}

template <typename T>
void opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json idm_to_json(const drivers::IdmParams& p) {
  return {{"v_des", p.v_des},
          {"d_min", p.d_min},
          {"time_headway", p.time_headway},
          {"a_max", p.a_max},
          {"b_pref", p.b_pref}};
}

void idm_from_json(const json& j, const std::string& where,
                   drivers::IdmParams& p) {
  check_keys(j, where, {"v_des", "d_min", "time_headway", "a_max", "b_pref"});
  opt(j, "v_des", p.v_des);
  opt(j, "d_min", p.d_min);
  opt(j, "time_headway", p.time_headway);
  opt(j, "a_max", p.a_max);
  opt(j, "b_pref", p.b_pref);
}

}  // namespace

sim::RoadwayPtr RoadwaySection::build() const {
  if (kind == "straight") {
    return std::make_shared<sim::RoadwayGeometry>(
        sim::RoadwayGeometry::straight(length, lane_count, lane_width));
  }
  if (kind == "oval") {
    return std::make_shared<sim::RoadwayGeometry>(sim::RoadwayGeometry::oval(
        straight_length, curve_radius, lane_count, lane_width));
  }
  throw ConfigError("roadway.kind must be 'straight' or 'oval'");
}

nlohmann::json RunConfig::to_json() const {
  json j;
  j["roadway"] = {{"kind", roadway.kind},
                  {"length", roadway.length},
                  {"straight_length", roadway.straight_length},
                  {"curve_radius", roadway.curve_radius},
                  {"lane_count", roadway.lane_count},
                  {"lane_width", roadway.lane_width},
                  {"dt", roadway.sim.dt},
                  {"horizon", roadway.sim.horizon},
                  {"accel_bound", roadway.sim.accel_bound},
                  {"turn_rate_bound", roadway.sim.turn_rate_bound}};

  json classes;
  for (int i = 0; i < drivers::kStyleCount; ++i) {
    const auto& prior = styles.library.classes[static_cast<size_t>(i)];
    json c = idm_to_json(prior.idm);
    c["v_des_mean"] = prior.v_des_mean;
    c["v_des_std"] = prior.v_des_std;
    classes[drivers::style_name(static_cast<drivers::StyleClass>(i))] = c;
  }
  j["styles"] = {
      {"classes", classes},
      {"mix", styles.mix},
      {"noise",
       {{"sigma_accel", styles.library.noise.sigma_accel},
        {"sigma_turn", styles.library.noise.sigma_turn}}},
      {"tracker",
       {{"k_offset", styles.library.tracker.k_offset},
        {"k_heading", styles.library.tracker.k_heading}}},
      {"mobil",
       {{"politeness", styles.library.classes[0].mobil.politeness},
        {"accel_gain_threshold",
         styles.library.classes[0].mobil.accel_gain_threshold},
        {"b_safe", styles.library.classes[0].mobil.b_safe}}},
      {"lane_change_cooldown", styles.library.lane_change_cooldown}};

  j["features"] = {{"n_beams", features.n_beams},
                   {"max_range", features.max_range},
                   {"undefined_time_value", features.undefined_time_value},
                   {"groups",
                    {{"ego", features.ego},
                     {"leader", features.leader},
                     {"lidar", features.lidar},
                     {"temporal", features.temporal},
                     {"indicators", features.indicators}}}};

  j["policy"] = policy.to_json();

  j["trpo"] = {{"delta_kl", trpo.trpo.delta_kl},
               {"gae_lambda", trpo.trpo.gae_lambda},
               {"cg_iters", trpo.trpo.cg_iters},
               {"cg_damping", trpo.trpo.cg_damping},
               {"backtrack_ratio", trpo.trpo.backtrack_ratio},
               {"max_backtracks", trpo.trpo.max_backtracks},
               {"vf_epochs", trpo.vf_fit.epochs},
               {"vf_minibatch", trpo.vf_fit.minibatch},
               {"vf_learning_rate", trpo.vf_fit.learning_rate}};

  j["critic"] = {{"widths", critic.widths},
                 {"dropout", critic.dropout},
                 {"gp_coefficient", critic.gp_coefficient},
                 {"learning_rate", critic.learning_rate},
                 {"batch_size", critic.batch_size},
                 {"epochs_per_iter", critic.epochs_per_iter},
                 {"replay_iters", critic.replay_iters},
                 {"normalizer_decay", critic.normalizer_decay},
                 {"normalizer_warmup", critic.normalizer_warmup},
                 {"loss", critic.logistic ? "logistic" : "wgan_gp"}};

  j["trainer"] = {
      {"phase1",
       {{"iterations", trainer.phases.phase1.iterations},
        {"gamma", trainer.phases.phase1.gamma},
        {"batch_size", trainer.phases.phase1.batch_size}}},
      {"phase2",
       {{"iterations", trainer.phases.phase2.iterations},
        {"gamma", trainer.phases.phase2.gamma},
        {"batch_size", trainer.phases.phase2.batch_size}}},
      {"run_phase2", trainer.phases.run_phase2},
      {"curriculum",
       {{"initial", trainer.curriculum.initial},
        {"increment", trainer.curriculum.increment},
        {"period", trainer.curriculum.period},
        {"finetune", trainer.curriculum.finetune}}},
      {"penalty",
       {{"magnitude", trainer.penalty.magnitude},
        {"mode",
         trainer.penalty.mode == train::PenaltyConfig::Mode::Binary
             ? "binary"
             : "smooth"},
        {"offroad_threshold", trainer.penalty.offroad_threshold},
        {"offroad_ramp_start", trainer.penalty.offroad_ramp_start},
        {"brake_threshold", trainer.penalty.brake_threshold},
        {"brake_ramp_start", trainer.penalty.brake_ramp_start},
        {"reward_std_multiple", trainer.penalty.reward_std_multiple}}},
      {"info",
       {{"lambda", trainer.info.lambda},
        {"code_count", trainer.info.code_count},
        {"burn_in_length", trainer.info.burn_in_length},
        {"gru_units", trainer.info.gru_units},
        {"learning_rate", trainer.info.learning_rate},
        {"rollout_updates_per_iter", trainer.info.rollout_updates_per_iter},
        {"supervised_updates_per_iter",
         trainer.info.supervised_updates_per_iter},
        {"sequences_per_update", trainer.info.sequences_per_update}}},
      {"bc",
       {{"epochs", trainer.bc.epochs},
        {"learning_rate", trainer.bc.learning_rate},
        {"minibatch", trainer.bc.minibatch},
        {"subseq_len", trainer.bc.subseq_len},
        {"val_fraction", trainer.bc.val_fraction},
        {"max_pairs", trainer.bc.max_pairs}}},
      {"checkpoint_period", trainer.checkpoint_period},
      {"env_others", trainer.env_others},
      {"rollout_horizon", trainer.rollout_horizon},
      {"norm_sample", trainer.norm_sample}};

  j["eval"] = {{"horizon", eval.horizon},
               {"n_rollouts", eval.n_rollouts},
               {"controlled", eval.controlled},
               {"agent_counts", eval.agent_counts},
               {"burn_in", eval.burn_in},
               {"z_from_encoder", eval.z_from_encoder}};

  j["demos"] = {{"episodes", demos.episodes},
                {"val_episodes", demos.val_episodes},
                {"steps", demos.steps},
                {"val_steps", demos.val_steps},
                {"vehicles", demos.vehicles},
                {"warmup_steps", demos.warmup_steps},
                {"styled", demos.styled}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  check_keys(j, "<root>",
             {"roadway", "styles", "features", "policy", "trpo", "critic",
              "trainer", "eval", "demos"});
  RunConfig cfg;

  if (j.contains("roadway")) {
    const json& r = j.at("roadway");
    check_keys(r, "roadway",
               {"kind", "length", "straight_length", "curve_radius",
                "lane_count", "lane_width", "dt", "horizon", "accel_bound",
                "turn_rate_bound"});
    opt(r, "kind", cfg.roadway.kind);
    opt(r, "length", cfg.roadway.length);
    opt(r, "straight_length", cfg.roadway.straight_length);
    opt(r, "curve_radius", cfg.roadway.curve_radius);
    opt(r, "lane_count", cfg.roadway.lane_count);
    opt(r, "lane_width", cfg.roadway.lane_width);
    opt(r, "dt", cfg.roadway.sim.dt);
    opt(r, "horizon", cfg.roadway.sim.horizon);
    opt(r, "accel_bound", cfg.roadway.sim.accel_bound);
    opt(r, "turn_rate_bound", cfg.roadway.sim.turn_rate_bound);
    if (cfg.roadway.sim.dt <= 0 || cfg.roadway.sim.horizon < 1)
      throw ConfigError("roadway: dt must be positive, horizon >= 1");
  }

  if (j.contains("styles")) {
    const json& s = j.at("styles");
    check_keys(s, "styles",
               {"classes", "mix", "noise", "tracker", "mobil",
                "lane_change_cooldown"});
    if (s.contains("classes")) {
      for (int i = 0; i < drivers::kStyleCount; ++i) {
        const char* name =
            drivers::style_name(static_cast<drivers::StyleClass>(i));
        if (!s.at("classes").contains(name)) continue;
        const json& c = s.at("classes").at(name);
        auto& prior = cfg.styles.library.classes[static_cast<size_t>(i)];
        check_keys(c, std::string("styles.classes.") + name,
                   {"v_des", "d_min", "time_headway", "a_max", "b_pref",
                    "v_des_mean", "v_des_std"});
        json idm = c;
        idm.erase("v_des_mean");
        idm.erase("v_des_std");
        idm_from_json(idm, std::string("styles.classes.") + name, prior.idm);
        opt(c, "v_des_mean", prior.v_des_mean);
        opt(c, "v_des_std", prior.v_des_std);
      }
    }
    if (s.contains("mix")) {
      auto mix = s.at("mix").get<std::vector<double>>();
      if (mix.size() != drivers::kStyleCount)
        throw ConfigError("styles.mix must list four weights");
      double sum = 0;
      for (double m : mix) sum += m;
      if (sum <= 0) throw ConfigError("styles.mix must sum to > 0");
      for (int i = 0; i < drivers::kStyleCount; ++i)
        cfg.styles.mix[static_cast<size_t>(i)] = mix[static_cast<size_t>(i)] / sum;
    }
    if (s.contains("noise")) {
      check_keys(s.at("noise"), "styles.noise", {"sigma_accel", "sigma_turn"});
      opt(s.at("noise"), "sigma_accel", cfg.styles.library.noise.sigma_accel);
      opt(s.at("noise"), "sigma_turn", cfg.styles.library.noise.sigma_turn);
    }
    if (s.contains("tracker")) {
      check_keys(s.at("tracker"), "styles.tracker", {"k_offset", "k_heading"});
      opt(s.at("tracker"), "k_offset", cfg.styles.library.tracker.k_offset);
      opt(s.at("tracker"), "k_heading", cfg.styles.library.tracker.k_heading);
    }
    if (s.contains("mobil")) {
      check_keys(s.at("mobil"), "styles.mobil",
                 {"politeness", "accel_gain_threshold", "b_safe"});
      drivers::MobilParams mp;
      opt(s.at("mobil"), "politeness", mp.politeness);
      opt(s.at("mobil"), "accel_gain_threshold", mp.accel_gain_threshold);
      opt(s.at("mobil"), "b_safe", mp.b_safe);
      for (auto& prior : cfg.styles.library.classes) prior.mobil = mp;
    }
    opt(s, "lane_change_cooldown", cfg.styles.library.lane_change_cooldown);
  }

  if (j.contains("features")) {
    const json& f = j.at("features");
    check_keys(f, "features",
               {"n_beams", "max_range", "undefined_time_value", "groups"});
    opt(f, "n_beams", cfg.features.n_beams);
    opt(f, "max_range", cfg.features.max_range);
    opt(f, "undefined_time_value", cfg.features.undefined_time_value);
    if (f.contains("groups")) {
      check_keys(f.at("groups"), "features.groups",
                 {"ego", "leader", "lidar", "temporal", "indicators"});
      opt(f.at("groups"), "ego", cfg.features.ego);
      opt(f.at("groups"), "leader", cfg.features.leader);
      opt(f.at("groups"), "lidar", cfg.features.lidar);
      opt(f.at("groups"), "temporal", cfg.features.temporal);
      opt(f.at("groups"), "indicators", cfg.features.indicators);
    }
    if (cfg.features.n_beams < 1 || cfg.features.max_range <= 0 ||
        cfg.features.undefined_time_value <= 0)
      throw ConfigError("features: invalid values");
  }

  if (j.contains("policy")) {
    const json& p = j.at("policy");
    check_keys(p, "policy",
               {"trunk", "trunk_widths", "gru_units", "trunk_gru_units",
                "log_std_init", "latent"});
    if (p.contains("trunk")) {
      auto kind = policy::trunk_kind_from_name(p.at("trunk").get<std::string>());
      if (!kind) throw ConfigError("policy.trunk must be mlp|gru_trunk|gru");
      cfg.policy.trunk = *kind;
    }
    opt(p, "trunk_widths", cfg.policy.trunk_widths);
    opt(p, "gru_units", cfg.policy.gru_units);
    opt(p, "trunk_gru_units", cfg.policy.trunk_gru_units);
    opt(p, "log_std_init", cfg.policy.log_std_init);
    if (p.contains("latent")) {
      check_keys(p.at("latent"), "policy.latent",
                 {"enabled", "count", "embed_width", "prior"});
      opt(p.at("latent"), "enabled", cfg.policy.latent.enabled);
      opt(p.at("latent"), "count", cfg.policy.latent.count);
      opt(p.at("latent"), "embed_width", cfg.policy.latent.embed_width);
      opt(p.at("latent"), "prior", cfg.policy.latent.prior);
    }
  }

  if (j.contains("trpo")) {
    const json& t = j.at("trpo");
    check_keys(t, "trpo",
               {"delta_kl", "gae_lambda", "cg_iters", "cg_damping",
                "backtrack_ratio", "max_backtracks", "vf_epochs",
                "vf_minibatch", "vf_learning_rate"});
    opt(t, "delta_kl", cfg.trpo.trpo.delta_kl);
    opt(t, "gae_lambda", cfg.trpo.trpo.gae_lambda);
    opt(t, "cg_iters", cfg.trpo.trpo.cg_iters);
    opt(t, "cg_damping", cfg.trpo.trpo.cg_damping);
    opt(t, "backtrack_ratio", cfg.trpo.trpo.backtrack_ratio);
    opt(t, "max_backtracks", cfg.trpo.trpo.max_backtracks);
    opt(t, "vf_epochs", cfg.trpo.vf_fit.epochs);
    opt(t, "vf_minibatch", cfg.trpo.vf_fit.minibatch);
    opt(t, "vf_learning_rate", cfg.trpo.vf_fit.learning_rate);
    if (cfg.trpo.trpo.delta_kl <= 0 || cfg.trpo.trpo.gae_lambda < 0 ||
        cfg.trpo.trpo.gae_lambda > 1)
      throw ConfigError("trpo: delta_kl > 0 and 0 <= gae_lambda <= 1");
  }

  if (j.contains("critic")) {
    const json& c = j.at("critic");
    check_keys(c, "critic",
               {"widths", "dropout", "gp_coefficient", "learning_rate",
                "batch_size", "epochs_per_iter", "replay_iters",
                "normalizer_decay", "normalizer_warmup", "loss"});
    opt(c, "widths", cfg.critic.widths);
    opt(c, "dropout", cfg.critic.dropout);
    opt(c, "gp_coefficient", cfg.critic.gp_coefficient);
    opt(c, "learning_rate", cfg.critic.learning_rate);
    opt(c, "batch_size", cfg.critic.batch_size);
    opt(c, "epochs_per_iter", cfg.critic.epochs_per_iter);
    opt(c, "replay_iters", cfg.critic.replay_iters);
    opt(c, "normalizer_decay", cfg.critic.normalizer_decay);
    opt(c, "normalizer_warmup", cfg.critic.normalizer_warmup);
    if (c.contains("loss")) {
      std::string loss = c.at("loss").get<std::string>();
      if (loss != "wgan_gp" && loss != "logistic")
        throw ConfigError("critic.loss must be wgan_gp or logistic");
      cfg.critic.logistic = loss == "logistic";
    }
  }

  if (j.contains("trainer")) {
    const json& t = j.at("trainer");
    check_keys(t, "trainer",
               {"phase1", "phase2", "run_phase2", "curriculum", "penalty",
                "info", "bc", "checkpoint_period", "env_others",
                "rollout_horizon", "norm_sample"});
    auto phase = [&](const char* key, train::PhaseConfig& pc) {
      if (!t.contains(key)) return;
      check_keys(t.at(key), std::string("trainer.") + key,
                 {"iterations", "gamma", "batch_size"});
      opt(t.at(key), "iterations", pc.iterations);
      opt(t.at(key), "gamma", pc.gamma);
      opt(t.at(key), "batch_size", pc.batch_size);
      if (pc.gamma <= 0 || pc.gamma >= 1)
        throw ConfigError("trainer: discount must lie in (0, 1)");
    };
    phase("phase1", cfg.trainer.phases.phase1);
    phase("phase2", cfg.trainer.phases.phase2);
    opt(t, "run_phase2", cfg.trainer.phases.run_phase2);
    if (t.contains("curriculum")) {
      check_keys(t.at("curriculum"), "trainer.curriculum",
                 {"initial", "increment", "period", "finetune"});
      opt(t.at("curriculum"), "initial", cfg.trainer.curriculum.initial);
      opt(t.at("curriculum"), "increment", cfg.trainer.curriculum.increment);
      opt(t.at("curriculum"), "period", cfg.trainer.curriculum.period);
      opt(t.at("curriculum"), "finetune", cfg.trainer.curriculum.finetune);
    }
    if (t.contains("penalty")) {
      const json& p = t.at("penalty");
      check_keys(p, "trainer.penalty",
                 {"magnitude", "mode", "offroad_threshold",
                  "offroad_ramp_start", "brake_threshold", "brake_ramp_start",
                  "reward_std_multiple"});
      opt(p, "magnitude", cfg.trainer.penalty.magnitude);
      if (p.contains("mode")) {
        std::string mode = p.at("mode").get<std::string>();
        if (mode == "binary")
          cfg.trainer.penalty.mode = train::PenaltyConfig::Mode::Binary;
        else if (mode == "smooth")
          cfg.trainer.penalty.mode = train::PenaltyConfig::Mode::Smooth;
        else
          throw ConfigError("trainer.penalty.mode must be binary or smooth");
      }
      opt(p, "offroad_threshold", cfg.trainer.penalty.offroad_threshold);
      opt(p, "offroad_ramp_start", cfg.trainer.penalty.offroad_ramp_start);
      opt(p, "brake_threshold", cfg.trainer.penalty.brake_threshold);
      opt(p, "brake_ramp_start", cfg.trainer.penalty.brake_ramp_start);
      opt(p, "reward_std_multiple", cfg.trainer.penalty.reward_std_multiple);
      if (cfg.trainer.penalty.offroad_ramp_start <=
              cfg.trainer.penalty.offroad_threshold ||
          cfg.trainer.penalty.brake_ramp_start <=
              cfg.trainer.penalty.brake_threshold)
        throw ConfigError("trainer.penalty: ramp starts must precede thresholds");
    }
    if (t.contains("info")) {
      const json& i = t.at("info");
      check_keys(i, "trainer.info",
                 {"lambda", "code_count", "burn_in_length", "gru_units",
                  "learning_rate", "rollout_updates_per_iter",
                  "supervised_updates_per_iter", "sequences_per_update"});
      opt(i, "lambda", cfg.trainer.info.lambda);
      opt(i, "code_count", cfg.trainer.info.code_count);
      opt(i, "burn_in_length", cfg.trainer.info.burn_in_length);
      opt(i, "gru_units", cfg.trainer.info.gru_units);
      opt(i, "learning_rate", cfg.trainer.info.learning_rate);
      opt(i, "rollout_updates_per_iter",
          cfg.trainer.info.rollout_updates_per_iter);
      opt(i, "supervised_updates_per_iter",
          cfg.trainer.info.supervised_updates_per_iter);
      opt(i, "sequences_per_update", cfg.trainer.info.sequences_per_update);
      if (cfg.trainer.info.lambda < 0)
        throw ConfigError("trainer.info.lambda must be >= 0");
    }
    if (t.contains("bc")) {
      const json& b = t.at("bc");
      check_keys(b, "trainer.bc",
                 {"epochs", "learning_rate", "minibatch", "subseq_len",
                  "val_fraction", "max_pairs"});
      opt(b, "epochs", cfg.trainer.bc.epochs);
      opt(b, "learning_rate", cfg.trainer.bc.learning_rate);
      opt(b, "minibatch", cfg.trainer.bc.minibatch);
      opt(b, "subseq_len", cfg.trainer.bc.subseq_len);
      opt(b, "val_fraction", cfg.trainer.bc.val_fraction);
      opt(b, "max_pairs", cfg.trainer.bc.max_pairs);
    }
    opt(t, "checkpoint_period", cfg.trainer.checkpoint_period);
    opt(t, "env_others", cfg.trainer.env_others);
    if (cfg.trainer.env_others != "playback" &&
        cfg.trainer.env_others != "rules")
      throw ConfigError("trainer.env_others must be playback or rules");
    opt(t, "rollout_horizon", cfg.trainer.rollout_horizon);
    opt(t, "norm_sample", cfg.trainer.norm_sample);
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, "eval",
               {"horizon", "n_rollouts", "controlled", "agent_counts",
                "burn_in", "z_from_encoder"});
    opt(e, "horizon", cfg.eval.horizon);
    opt(e, "n_rollouts", cfg.eval.n_rollouts);
    opt(e, "controlled", cfg.eval.controlled);
    opt(e, "agent_counts", cfg.eval.agent_counts);
    opt(e, "burn_in", cfg.eval.burn_in);
    opt(e, "z_from_encoder", cfg.eval.z_from_encoder);
  }

  if (j.contains("demos")) {
    const json& d = j.at("demos");
    check_keys(d, "demos",
               {"episodes", "val_episodes", "steps", "val_steps", "vehicles",
                "warmup_steps", "styled"});
    opt(d, "episodes", cfg.demos.episodes);
    opt(d, "val_episodes", cfg.demos.val_episodes);
    opt(d, "steps", cfg.demos.steps);
    opt(d, "val_steps", cfg.demos.val_steps);
    opt(d, "vehicles", cfg.demos.vehicles);
    opt(d, "warmup_steps", cfg.demos.warmup_steps);
    opt(d, "styled", cfg.demos.styled);
  }

  return cfg;
}

RunConfig RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded())
    throw ConfigError("config file is not valid JSON: " + path.string());
  return from_json(j);
}

void RunConfig::save_file(const std::filesystem::path& path) const {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + tmp.string());
    os << to_json().dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

uint64_t RunConfig::hash() const { return fnv1a64(to_json().dump()); }

train::EnvConfig RunConfig::env_config() const {
  train::EnvConfig env;
  env.sim = roadway.sim;
  env.features = features;
  env.others = trainer.env_others == "rules" ? train::OtherVehicleMode::Rules
                                             : train::OtherVehicleMode::Playback;
  env.styles = styles.library;
  env.rollout_horizon = trainer.rollout_horizon;
  return env;
}

}  // namespace dm::io
