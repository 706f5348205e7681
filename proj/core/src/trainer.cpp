#include "dm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dm::train {

namespace {

constexpr double kLogQFloor = -18.0;  // floor on log posterior rewards

std::string format_row(std::initializer_list<double> values) {
  std::string out;
  char buf[40];
  bool first = true;
  for (double v : values) {
    if (!first) out += ",";
    first = false;
    int len = std::snprintf(buf, sizeof buf, "%.10g", v);
    out.append(buf, static_cast<size_t>(len));
  }
  return out;
}

}  // namespace

uint64_t hash_params(const nn::ParamStore& params) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [name, t] : params.items()) {
    h = fnv1a64(name, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(t.data()),
                                 static_cast<size_t>(t.size()) * sizeof(double)),
                h);
  }
  return h;
}

AdversarialTrainer::AdversarialTrainer(TrainerSetup setup)
    : setup_(std::move(setup)),
      replay_(setup_.critic_cfg.replay_iters),
      normalizer_(setup_.critic_cfg.normalizer_decay,
                  setup_.critic_cfg.normalizer_warmup) {
  if (!setup_.demos) throw ConfigError("trainer needs demonstration data");
  layout_ = feat::ObservationLayout::from_config(setup_.env.features);
  expert_ = std::make_unique<io::ExpertDataset>(*setup_.demos,
                                                setup_.env.features);
  env_ = std::make_unique<DrivingEnv>(*setup_.demos, setup_.env);

  int obs_dim = layout_.total;
  policy_ = std::make_unique<policy::GaussianPolicy>(setup_.arch, obs_dim,
                                                     setup_.master_seed);
  vf_ = std::make_unique<trpo::ValueFunction>(obs_dim, setup_.master_seed);
  critic_ = std::make_unique<critic::CriticNet>(obs_dim, setup_.master_seed,
                                                setup_.critic_cfg);
  if (setup_.algo.info_enabled || setup_.algo.burn_in) {
    qnet_ = std::make_unique<QNetwork>(obs_dim, setup_.info.code_count,
                                       setup_.info.gru_units,
                                       setup_.master_seed);
  }
  if (policy_->latent())
    latent_prior_ = policy_->arch().latent.effective_prior();

  // Input standardization from expert statistics; identical for every
  // algorithm given the same demonstrations and master seed.
  {
    RngStream norm_rng = RngStream::substream(setup_.master_seed, "norm");
    int64_t cap = std::min<int64_t>(setup_.norm_sample,
                                    static_cast<int64_t>(expert_->size()));
    critic::PairBlock block = expert_->all(cap, &norm_rng);
    policy::InputNormalization obs_norm =
        policy::InputNormalization::from_data(block.observations);
    policy_->set_normalization(obs_norm);
    vf_->set_normalization(obs_norm);

    std::vector<std::vector<double>> joint;
    joint.reserve(block.size());
    for (size_t i = 0; i < block.size(); ++i) {
      std::vector<double> row = block.observations[i];
      row.push_back(block.actions(static_cast<int64_t>(i), 0));
      row.push_back(block.actions(static_cast<int64_t>(i), 1));
      joint.push_back(std::move(row));
    }
    policy::InputNormalization joint_norm =
        policy::InputNormalization::from_data(joint);
    critic_->set_normalization(joint_norm);
    if (qnet_) qnet_->set_normalization(joint_norm);
  }

  nn::AdamConfig critic_adam_cfg;
  critic_adam_cfg.learning_rate = setup_.critic_cfg.learning_rate;
  critic_adam_ = nn::Adam(critic_adam_cfg, critic_->params().total_size());
  if (qnet_) {
    nn::AdamConfig q_adam_cfg;
    q_adam_cfg.learning_rate = setup_.info.learning_rate;
    q_adam_ = nn::Adam(q_adam_cfg, qnet_->params().total_size());
  }

  sampler_rng_ = RngStream::substream(setup_.master_seed, "sampler");
  critic_rng_ = RngStream::substream(setup_.master_seed, "critic");
  vf_rng_ = RngStream::substream(setup_.master_seed, "vf");
  qnet_rng_ = RngStream::substream(setup_.master_seed, "qnet");

  if (!setup_.out_dir.empty()) {
    std::filesystem::create_directories(setup_.out_dir);
    bool restored = setup_.resume && try_restore_state_();
    if (!restored) {
      nlohmann::json manifest = {
          {"algorithm", setup_.algo_name},
          {"master_seed", setup_.master_seed},
          {"config_hash", setup_.config_hash},
          {"revision", "drivemimic-0.1.0"},
      };
      std::ofstream os(setup_.out_dir / "manifest.json",
                       std::ios::binary | std::ios::trunc);
      os << manifest.dump(2) << "\n";
      std::ofstream metrics(setup_.out_dir / "metrics.csv",
                            std::ios::binary | std::ios::trunc);
      metrics << "iteration,phase,m_agents,episodes,pairs,reward_raw_mean,"
                 "reward_mean,penalty_mean,info_bonus_mean,critic_gap,"
                 "critic_grad_penalty,critic_loss,surrogate_before,"
                 "surrogate_after,kl,entropy,backtracks,accepted,vf_loss,"
                 "q_nll,collision_frac,offroad_frac,hard_brake_frac\n";
    }
  }
}

AdversarialTrainer::~AdversarialTrainer() = default;

int AdversarialTrainer::sample_latent_(const std::vector<double>& probs,
                                       RngStream& rng) const {
  double u = rng.uniform();
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

void AdversarialTrainer::collect_episode_(int m, Staging& staging,
                                          std::vector<TrajectorySlice>& slices) {
  ++episode_counter_;
  uint64_t dyn_seed =
      RngStream::substream(setup_.master_seed, "env_dyn",
                           static_cast<uint64_t>(episode_counter_))
          .next_u64();
  RngStream pol_rng = RngStream::substream(
      setup_.master_seed, "policy", static_cast<uint64_t>(episode_counter_));
  RngStream lat_rng = RngStream::substream(
      setup_.master_seed, "latent", static_cast<uint64_t>(episode_counter_));

  std::vector<std::vector<double>> obs;
  std::vector<int> codes;
  if (setup_.algo.burn_in && setup_.info.burn_in_length > 0) {
    // take over at the end of a demonstration segment; condition z on it
    int64_t burn = setup_.info.burn_in_length;
    std::vector<int64_t> eligible;
    for (int64_t e = 0; e < setup_.demos->episode_count(); ++e)
      if (setup_.demos->episode_length(e) >= burn + 1) eligible.push_back(e);
    if (eligible.empty())
      throw SegmentTooShort("no episode long enough for the burn-in segment");
    int64_t ep = eligible[static_cast<size_t>(sampler_rng_.uniform_int(
        0, static_cast<int64_t>(eligible.size()) - 1))];
    const auto& vehicles = setup_.demos->episode(ep).vehicles;
    int vi = static_cast<int>(sampler_rng_.uniform_int(
        0, static_cast<int64_t>(vehicles.size()) - 1));
    int vid = vehicles[static_cast<size_t>(vi)].id;
    obs = env_->reset_at(ep, burn, {vid}, dyn_seed);
    critic::PairBlock segment =
        expert_->extract_sequence({ep, vid, 0, burn});
    Eigen::VectorXd post = qnet_->posterior(segment);
    std::vector<double> probs(post.data(), post.data() + post.size());
    codes.push_back(sample_latent_(probs, lat_rng));  // sampled in training
  } else {
    obs = env_->reset(m, sampler_rng_, dyn_seed);
    if (policy_->latent())
      for (int i = 0; i < m; ++i)
        codes.push_back(sample_latent_(latent_prior_, lat_rng));
  }

  int agents = static_cast<int>(obs.size());
  nn::Tensor hidden = policy_->initial_hidden(agents);

  struct Row {
    std::vector<double> obs;
    sim::Action action;
    double log_prob;
    std::vector<double> hidden;
    double applied_accel, d_road, d_c;
    uint8_t collided;
  };
  std::vector<std::vector<Row>> per_agent(static_cast<size_t>(agents));

  while (env_->steps_available() > 0) {
    policy::GaussianPolicy::ActOut act =
        policy_->act(obs, hidden, codes, pol_rng);
    EnvStepResult step = env_->step(act.actions);
    for (int i = 0; i < agents; ++i) {
      Row row;
      row.obs = std::move(obs[static_cast<size_t>(i)]);
      row.action = act.actions[static_cast<size_t>(i)];
      row.log_prob = act.log_prob[static_cast<size_t>(i)];
      row.hidden.resize(static_cast<size_t>(hidden.cols()));
      for (int64_t c = 0; c < hidden.cols(); ++c)
        row.hidden[static_cast<size_t>(c)] = hidden(i, c);
      row.applied_accel = step.applied_accel[static_cast<size_t>(i)];
      row.d_road = step.d_road[static_cast<size_t>(i)];
      row.d_c = step.d_c[static_cast<size_t>(i)];
      row.collided = step.collided[static_cast<size_t>(i)];
      per_agent[static_cast<size_t>(i)].push_back(std::move(row));
    }
    hidden = act.hidden;
    obs = std::move(step.observations);
    if (step.done) break;
  }

  // append one contiguous run per agent
  for (int i = 0; i < agents; ++i) {
    auto& rows = per_agent[static_cast<size_t>(i)];
    if (rows.empty()) continue;
    size_t begin = staging.count;
    for (Row& row : rows) {
      staging.observations.push_back(std::move(row.obs));
      staging.actions.push_back(row.action.accel);
      staging.actions.push_back(row.action.turn_rate);
      staging.hiddens.insert(staging.hiddens.end(), row.hidden.begin(),
                             row.hidden.end());
      staging.log_probs.push_back(row.log_prob);
      staging.dones.push_back(0);
      staging.applied_accel.push_back(row.applied_accel);
      staging.d_road.push_back(row.d_road);
      staging.d_c.push_back(row.d_c);
      staging.agent_ids.push_back(i);
      staging.episode_ids.push_back(episode_counter_);
      if (!codes.empty())
        staging.latent.push_back(codes[static_cast<size_t>(i)]);
      ++staging.count;
    }
    staging.dones.back() = 1;
    slices.push_back(
        {begin, staging.count, codes.empty() ? 0 : codes[static_cast<size_t>(i)]});
  }
}

trpo::RolloutBatch AdversarialTrainer::Staging::materialize(int hidden_size) {
  trpo::RolloutBatch batch;
  batch.observations = std::move(observations);
  int64_t n = static_cast<int64_t>(count);
  batch.actions = nn::Tensor::from(n, 2, std::move(actions));
  batch.hidden_states = nn::Tensor::from(n, hidden_size, std::move(hiddens));
  batch.log_probs = std::move(log_probs);
  batch.dones = std::move(dones);
  batch.latent = std::move(latent);
  batch.agent_ids = std::move(agent_ids);
  batch.episode_ids = std::move(episode_ids);
  batch.applied_accel = std::move(applied_accel);
  batch.d_road = std::move(d_road);
  batch.d_c = std::move(d_c);
  batch.raw_scores.assign(static_cast<size_t>(n), 0.0);
  return batch;
}

void AdversarialTrainer::iterate_() {
  bool finetune = iteration_ >= setup_.phases.phase1.iterations;
  const PhaseConfig& pc =
      finetune ? setup_.phases.phase2 : setup_.phases.phase1;

  IterationRecord rec;
  rec.iteration = iteration_;
  rec.phase = finetune ? 2 : 1;
  int m = setup_.algo.use_curriculum
              ? curriculum_agents(setup_.curriculum, iteration_, finetune)
              : setup_.algo.fixed_agents;
  rec.m_agents = m;

  Staging staging;
  std::vector<TrajectorySlice> slices;
  while (staging.count < static_cast<size_t>(pc.batch_size)) {
    collect_episode_(m, staging, slices);
    ++rec.episodes;
  }
  trpo::RolloutBatch batch = staging.materialize(policy_->hidden_size());
  rec.pairs = static_cast<int64_t>(batch.size());

  // critic scores become the surrogate rewards (Wasserstein convention)
  std::vector<double> raw =
      critic_->score(batch.observations, batch.actions);
  batch.raw_scores = raw;
  batch.rewards.resize(raw.size());
  double raw_sum = 0, reward_sum = 0, penalty_sum = 0, info_sum = 0;
  for (size_t i = 0; i < raw.size(); ++i) {
    batch.rewards[i] =
        critic::surrogate_reward(*critic_, normalizer_, raw[i], true);
    raw_sum += raw[i];
  }
  if (setup_.algo.penalty_enabled && setup_.penalty.magnitude > 0.0) {
    double scale =
        setup_.penalty.reward_std_multiple / setup_.penalty.magnitude;
    for (size_t i = 0; i < batch.size(); ++i) {
      double pen = rail_penalty(batch.d_c[i], batch.d_road[i],
                                batch.applied_accel[i], setup_.penalty);
      batch.rewards[i] -= pen * scale;
      penalty_sum += pen;
    }
  }
  if (setup_.algo.info_enabled && setup_.info.lambda != 0.0) {
    for (const TrajectorySlice& slice : slices) {
      critic::PairBlock traj;
      traj.source = critic::PairSource::PolicyRollout;
      traj.observations.assign(batch.observations.begin() + slice.begin,
                               batch.observations.begin() + slice.end);
      int64_t len = static_cast<int64_t>(slice.end - slice.begin);
      traj.actions = nn::Tensor(len, 2);
      for (int64_t r = 0; r < len; ++r) {
        traj.actions(r, 0) = batch.actions(static_cast<int64_t>(slice.begin) + r, 0);
        traj.actions(r, 1) = batch.actions(static_cast<int64_t>(slice.begin) + r, 1);
      }
      nn::Tensor logq = qnet_->log_posterior_prefixes(traj);
      for (int64_t r = 0; r < len; ++r) {
        double bonus = setup_.info.lambda *
                       std::max(logq(r, slice.code), kLogQFloor);
        batch.rewards[slice.begin + static_cast<size_t>(r)] += bonus;
        info_sum += bonus;
      }
    }
  }
  for (size_t i = 0; i < batch.size(); ++i) reward_sum += batch.rewards[i];
  double n = static_cast<double>(batch.size());
  rec.reward_raw_mean = raw_sum / n;
  rec.reward_mean = reward_sum / n;
  rec.penalty_mean = penalty_sum / n;
  rec.info_bonus_mean = info_sum / n;
  for (size_t i = 0; i < batch.size(); ++i) {
    rec.collision_frac += batch.d_c[i] <= 0.0 ? 1 : 0;
    rec.offroad_frac += batch.d_road[i] <= -0.1 ? 1 : 0;
    rec.hard_brake_frac += batch.applied_accel[i] <= -3.0 ? 1 : 0;
  }
  rec.collision_frac /= n;
  rec.offroad_frac /= n;
  rec.hard_brake_frac /= n;

  {
    critic::PairBlock block;
    block.source = critic::PairSource::PolicyRollout;
    block.observations = batch.observations;
    block.actions = batch.actions;
    replay_.push_iteration(std::move(block));
  }
  critic::CriticDiagnostics cd = critic::train_critic(
      *critic_, *expert_, replay_, setup_.critic_cfg, critic_adam_,
      critic_rng_);
  rec.critic_gap = cd.wasserstein_gap;
  rec.critic_grad_penalty = cd.gradient_penalty;
  rec.critic_loss = cd.loss;

  std::vector<double> values = vf_->predict(batch.observations);
  std::vector<double> advantages =
      trpo::gae_advantages(batch.rewards, batch.dones, values, pc.gamma,
                           setup_.trpo_cfg.gae_lambda, true);
  std::vector<double> returns =
      trpo::discounted_returns(batch.rewards, batch.dones, pc.gamma);

  trpo::TrpoDiagnostics td =
      trpo::trpo_update(*policy_, batch, advantages, setup_.trpo_cfg);
  rec.surrogate_before = td.surrogate_before;
  rec.surrogate_after = td.surrogate_after;
  rec.kl = td.kl;
  rec.backtracks = td.backtracks;
  rec.accepted = td.accepted;
  rec.entropy = policy_->entropy();

  std::vector<double> vf_losses = trpo::fit_value_function(
      *vf_, batch.observations, returns, setup_.vf_fit, vf_rng_);
  rec.vf_loss = vf_losses.empty() ? 0.0 : vf_losses.back();

  if (qnet_) update_q_network_(batch, slices, rec);

  rec.policy_hash = hash_params(policy_->params());
  rec.critic_hash = hash_params(critic_->params());
  records_.push_back(rec);
  ++iteration_;

  if (!setup_.out_dir.empty()) {
    write_metrics_row_(rec);
    if (iteration_ % setup_.checkpoint_period == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_%06lld.dmck",
                    static_cast<long long>(iteration_));
      write_policy_checkpoint_(name);
      save_state_();
    }
  }
}

void AdversarialTrainer::update_q_network_(
    const trpo::RolloutBatch& batch, const std::vector<TrajectorySlice>& slices,
    IterationRecord& rec) {
  auto slice_block = [&](const TrajectorySlice& s) {
    critic::PairBlock traj;
    traj.source = critic::PairSource::PolicyRollout;
    traj.observations.assign(batch.observations.begin() + s.begin,
                             batch.observations.begin() + s.end);
    int64_t len = static_cast<int64_t>(s.end - s.begin);
    traj.actions = nn::Tensor(len, 2);
    for (int64_t r = 0; r < len; ++r) {
      traj.actions(r, 0) = batch.actions(static_cast<int64_t>(s.begin) + r, 0);
      traj.actions(r, 1) = batch.actions(static_cast<int64_t>(s.begin) + r, 1);
    }
    return traj;
  };

  double nll_sum = 0;
  int nll_count = 0;
  for (int u = 0; u < setup_.info.rollout_updates_per_iter; ++u) {
    int take = std::min<int>(setup_.info.sequences_per_update,
                             static_cast<int>(slices.size()));
    if (take == 0) break;
    std::vector<critic::PairBlock> seqs;
    std::vector<int> labels;
    std::vector<int> picks = qnet_rng_.sample_without_replacement(
        static_cast<int>(slices.size()), take);
    for (int pi : picks) {
      seqs.push_back(slice_block(slices[static_cast<size_t>(pi)]));
      labels.push_back(slices[static_cast<size_t>(pi)].code);
    }
    nll_sum += qnet_->train_step(seqs, labels, q_adam_);
    ++nll_count;
  }

  if (setup_.algo.burn_in) {
    // ground the codes in the labeled demonstration styles
    const auto& tracks = expert_->tracks();
    std::vector<size_t> labeled;
    for (size_t i = 0; i < tracks.size(); ++i) {
      auto style = setup_.demos->style_of(tracks[i].episode,
                                          tracks[i].vehicle_id);
      if (style) labeled.push_back(i);
    }
    for (int u = 0; u < setup_.info.supervised_updates_per_iter && !labeled.empty();
         ++u) {
      int take = std::min<int>(setup_.info.sequences_per_update,
                               static_cast<int>(labeled.size()));
      std::vector<critic::PairBlock> seqs;
      std::vector<int> labels;
      std::vector<int> picks = qnet_rng_.sample_without_replacement(
          static_cast<int>(labeled.size()), take);
      for (int pi : picks) {
        const auto& tr = tracks[labeled[static_cast<size_t>(pi)]];
        int64_t len =
            std::min<int64_t>(setup_.info.burn_in_length, tr.length);
        seqs.push_back(
            expert_->extract_sequence({tr.episode, tr.vehicle_id, 0, len}));
        labels.push_back(static_cast<int>(
            *setup_.demos->style_of(tr.episode, tr.vehicle_id)));
      }
      nll_sum += qnet_->train_step(seqs, labels, q_adam_);
      ++nll_count;
    }
  }
  rec.q_nll = nll_count > 0 ? nll_sum / nll_count : 0.0;
}

void AdversarialTrainer::run_iterations(int n) {
  for (int i = 0; i < n; ++i) iterate_();
}

void AdversarialTrainer::run() {
  int64_t total = setup_.phases.total_iterations();
  while (iteration_ < total) iterate_();
  if (!setup_.out_dir.empty()) {
    write_policy_checkpoint_("checkpoint_final.dmck");
    save_state_();
  }
}

void AdversarialTrainer::write_metrics_row_(const IterationRecord& rec) {
  std::ofstream os(setup_.out_dir / "metrics.csv",
                   std::ios::binary | std::ios::app);
  os << rec.iteration << "," << rec.phase << "," << rec.m_agents << ","
     << rec.episodes << "," << rec.pairs << ","
     << format_row({rec.reward_raw_mean, rec.reward_mean, rec.penalty_mean,
                    rec.info_bonus_mean, rec.critic_gap,
                    rec.critic_grad_penalty, rec.critic_loss,
                    rec.surrogate_before, rec.surrogate_after, rec.kl,
                    rec.entropy})
     << "," << rec.backtracks << "," << (rec.accepted ? 1 : 0) << ","
     << format_row({rec.vf_loss, rec.q_nll, rec.collision_frac,
                    rec.offroad_frac, rec.hard_brake_frac})
     << "\n";
}

nn::Checkpoint AdversarialTrainer::policy_checkpoint() const {
  nlohmann::json meta = {
      {"iteration", iteration_},
      {"master_seed", setup_.master_seed},
      {"config_hash", setup_.config_hash},
      {"algorithm", setup_.algo_name},
  };
  return policy::policy_to_checkpoint(*policy_, layout_, std::move(meta));
}

void AdversarialTrainer::write_policy_checkpoint_(
    const std::string& name) const {
  nn::write_checkpoint_file(setup_.out_dir / name, policy_checkpoint());
}

void AdversarialTrainer::save_state_() const {
  nn::Checkpoint state;
  state.metadata = {
      {"kind", "train_state"},
      {"iteration", iteration_},
      {"episode_counter", episode_counter_},
      {"normalizer", normalizer_.serialize()},
      {"critic_adam", critic_adam_.serialize()},
      {"q_adam", qnet_ ? q_adam_.serialize() : std::string()},
      {"rng_sampler", sampler_rng_.serialize()},
      {"rng_critic", critic_rng_.serialize()},
      {"rng_vf", vf_rng_.serialize()},
      {"rng_qnet", qnet_rng_.serialize()},
      {"replay_blocks", static_cast<int>(replay_.blocks().size())},
      {"algorithm", setup_.algo_name},
      {"master_seed", setup_.master_seed},
      {"config_hash", setup_.config_hash},
  };
  for (const auto& [name, t] : policy_->params().items())
    state.tensors.emplace_back("policy/" + name, t);
  for (const auto& [name, t] : vf_->params().items())
    state.tensors.emplace_back("vf/" + name, t);
  for (const auto& [name, t] : critic_->params().items())
    state.tensors.emplace_back("critic/" + name, t);
  if (qnet_)
    for (const auto& [name, t] : qnet_->params().items())
      state.tensors.emplace_back("qnet/" + name, t);

  int bi = 0;
  for (const auto& block : replay_.blocks()) {
    int64_t n = static_cast<int64_t>(block.size());
    int64_t dim = n > 0 ? static_cast<int64_t>(block.observations[0].size()) : 0;
    nn::Tensor obs(n, dim);
    for (int64_t r = 0; r < n; ++r)
      for (int64_t c = 0; c < dim; ++c)
        obs(r, c) = block.observations[static_cast<size_t>(r)][static_cast<size_t>(c)];
    std::string prefix = "replay/" + std::to_string(bi);
    state.tensors.emplace_back(prefix + "/obs", std::move(obs));
    state.tensors.emplace_back(prefix + "/act", block.actions);
    ++bi;
  }
  nn::write_checkpoint_file(setup_.out_dir / "state_latest.dmck", state);
}

bool AdversarialTrainer::try_restore_state_() {
  std::filesystem::path path = setup_.out_dir / "state_latest.dmck";
  if (!std::filesystem::exists(path)) return false;
  nn::Checkpoint state = nn::read_checkpoint_file(path);
  if (state.metadata.value("kind", "") != "train_state")
    throw CorruptCheckpoint("not a training state file");
  if (state.metadata.value("algorithm", "") != setup_.algo_name)
    throw VersionMismatch("training state was produced by a different "
                          "algorithm");

  iteration_ = state.metadata.at("iteration").get<int64_t>();
  episode_counter_ = state.metadata.at("episode_counter").get<int64_t>();
  normalizer_.deserialize(state.metadata.at("normalizer").get<std::string>());
  critic_adam_.deserialize(state.metadata.at("critic_adam").get<std::string>());
  if (qnet_) q_adam_.deserialize(state.metadata.at("q_adam").get<std::string>());
  sampler_rng_.deserialize(state.metadata.at("rng_sampler").get<std::string>());
  critic_rng_.deserialize(state.metadata.at("rng_critic").get<std::string>());
  vf_rng_.deserialize(state.metadata.at("rng_vf").get<std::string>());
  qnet_rng_.deserialize(state.metadata.at("rng_qnet").get<std::string>());

  auto restore_store = [&](nn::ParamStore& store, const std::string& prefix) {
    for (auto& [name, t] : store.items()) {
      const nn::Tensor* stored = state.find(prefix + name);
      if (!stored || !stored->same_shape(t))
        throw CorruptCheckpoint("state tensor missing: " + prefix + name);
      t = *stored;
    }
  };
  restore_store(policy_->params(), "policy/");
  restore_store(vf_->params(), "vf/");
  restore_store(critic_->params(), "critic/");
  if (qnet_) restore_store(qnet_->params(), "qnet/");

  int nblocks = state.metadata.at("replay_blocks").get<int>();
  std::deque<critic::PairBlock> blocks;
  for (int b = 0; b < nblocks; ++b) {
    std::string prefix = "replay/" + std::to_string(b);
    const nn::Tensor* obs = state.find(prefix + "/obs");
    const nn::Tensor* act = state.find(prefix + "/act");
    if (!obs || !act) throw CorruptCheckpoint("state replay block missing");
    critic::PairBlock block;
    block.source = critic::PairSource::PolicyRollout;
    block.observations.reserve(static_cast<size_t>(obs->rows()));
    for (int64_t r = 0; r < obs->rows(); ++r) {
      std::vector<double> row(static_cast<size_t>(obs->cols()));
      for (int64_t c = 0; c < obs->cols(); ++c)
        row[static_cast<size_t>(c)] = (*obs)(r, c);
      block.observations.push_back(std::move(row));
    }
    block.actions = *act;
    blocks.push_back(std::move(block));
  }
  replay_.restore(std::move(blocks));

  // Drop any metrics rows beyond the restored iteration.
  std::filesystem::path metrics = setup_.out_dir / "metrics.csv";
  if (std::filesystem::exists(metrics)) {
    std::ifstream is(metrics, std::ios::binary);
    std::string line, kept;
    bool first = true;
    while (std::getline(is, line)) {
      if (first) {
        kept = line + "\n";
        first = false;
        continue;
      }
      int64_t it = std::atoll(line.c_str());
      if (it < iteration_) kept += line + "\n";
    }
    is.close();
    std::ofstream os(metrics, std::ios::binary | std::ios::trunc);
    os << kept;
  }
  return true;
}

// ---- behavioral cloning ----

namespace {

struct BcWindow {
  int64_t episode;
  int vehicle_id;
  int64_t start;
  int64_t length;
};

double bc_nll_batch(policy::GaussianPolicy& policy,
                    const io::ExpertDataset& dataset,
                    std::span<const BcWindow> windows, bool train,
                    nn::Adam* adam) {
  if (windows.empty()) return 0.0;
  int64_t wlen = windows.front().length;
  int64_t wcount = static_cast<int64_t>(windows.size());

  // gather rows: step-major batches across windows
  std::vector<critic::PairBlock> seqs;
  seqs.reserve(static_cast<size_t>(wcount));
  for (const BcWindow& w : windows)
    seqs.push_back(dataset.extract_sequence(
        {w.episode, w.vehicle_id, w.start, w.length}));

  nn::Tape tape;
  nn::GraphParams p(tape, policy.params(), train);
  nn::Var h = tape.constant(policy.initial_hidden(static_cast<int>(wcount)));
  nn::Var total;
  for (int64_t t = 0; t < wlen; ++t) {
    std::vector<std::vector<double>> obs_rows;
    obs_rows.reserve(static_cast<size_t>(wcount));
    nn::Tensor actions(wcount, 2);
    for (int64_t wi = 0; wi < wcount; ++wi) {
      const critic::PairBlock& seq = seqs[static_cast<size_t>(wi)];
      obs_rows.push_back(seq.observations[static_cast<size_t>(t)]);
      actions(wi, 0) = seq.actions(t, 0);
      actions(wi, 1) = seq.actions(t, 1);
    }
    nn::Var obs_v = tape.constant(policy.normalize(obs_rows));
    policy::PolicyEval eval = policy.build(p, obs_v, h, {}, &h);
    nn::Var logp = policy::gaussian_log_prob(tape, eval.mean, eval.log_std_row,
                                             tape.constant(std::move(actions)));
    nn::Var s = tape.sum(logp);
    total = total.valid() ? tape.add(total, s) : s;
  }
  nn::Var nll = tape.scale(total, -1.0 / static_cast<double>(wlen * wcount));
  double loss = tape.value(nll).scalar_value();
  if (train && adam) {
    std::vector<nn::Var> pvars = p.all();
    std::vector<nn::Var> grads = tape.gradients(nll, pvars);
    Eigen::VectorXd flat(policy.params().total_size());
    int64_t at = 0;
    for (nn::Var g : grads) {
      const nn::Tensor& t = tape.value(g);
      for (int64_t i = 0; i < t.size(); ++i) flat[at++] = t[i];
    }
    if (!flat.allFinite()) throw NonFiniteGradient("bc gradient");
    Eigen::VectorXd theta = policy.params().flatten();
    adam->step(theta, flat);
    policy.params().set_from_flat(theta);
    policy.clamp_log_std();
  }
  return loss;
}

}  // namespace

std::vector<BcRecord> train_bc(policy::GaussianPolicy& policy,
                               const io::ExpertDataset& dataset,
                               const BcConfig& cfg, uint64_t master_seed) {
  if (dataset.size() < 1000)
    throw InsufficientData("behavioral cloning needs at least 1000 pairs");

  RngStream split_rng = RngStream::substream(master_seed, "bc_split");
  RngStream rng = RngStream::substream(master_seed, "bc");

  int64_t wlen = policy.hidden_size() > 0 ? cfg.subseq_len : 1;
  std::vector<BcWindow> train_windows, val_windows;
  {
    const auto& tracks = dataset.tracks();
    std::vector<size_t> order(tracks.size());
    std::iota(order.begin(), order.end(), size_t{0});
    split_rng.shuffle(order);
    size_t val_count = static_cast<size_t>(
        std::llround(cfg.val_fraction * static_cast<double>(tracks.size())));
    for (size_t i = 0; i < order.size(); ++i) {
      const auto& tr = tracks[order[i]];
      bool is_val = i < val_count;
      for (int64_t start = 0; start + wlen <= tr.length; start += wlen) {
        (is_val ? val_windows : train_windows)
            .push_back({tr.episode, tr.vehicle_id, start, wlen});
      }
    }
    int64_t max_windows = cfg.max_pairs / wlen;
    if (static_cast<int64_t>(train_windows.size()) > max_windows) {
      rng.shuffle(train_windows);
      train_windows.resize(static_cast<size_t>(max_windows));
    }
    if (static_cast<int64_t>(val_windows.size()) > 4000 / wlen + 256)
      val_windows.resize(static_cast<size_t>(4000 / wlen + 256));
  }
  if (train_windows.empty())
    throw InsufficientData("no training windows for behavioral cloning");

  // input standardization from the training split
  {
    int64_t cap = std::min<int64_t>(20000, static_cast<int64_t>(dataset.size()));
    RngStream norm_rng = RngStream::substream(master_seed, "norm");
    critic::PairBlock block = dataset.all(cap, &norm_rng);
    policy.set_normalization(
        policy::InputNormalization::from_data(block.observations));
  }

  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  nn::Adam adam(adam_cfg, policy.params().total_size());

  int64_t windows_per_batch =
      std::max<int64_t>(1, cfg.minibatch / wlen);
  std::vector<BcRecord> records;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(train_windows);
    double train_nll = 0;
    int64_t batches = 0;
    for (size_t at = 0; at < train_windows.size();
         at += static_cast<size_t>(windows_per_batch)) {
      size_t stop = std::min(train_windows.size(),
                             at + static_cast<size_t>(windows_per_batch));
      train_nll += bc_nll_batch(
          policy, dataset,
          std::span<const BcWindow>(train_windows.data() + at, stop - at),
          true, &adam);
      ++batches;
    }
    double val_nll = 0;
    if (!val_windows.empty()) {
      int64_t vbatches = 0;
      for (size_t at = 0; at < val_windows.size();
           at += static_cast<size_t>(windows_per_batch)) {
        size_t stop = std::min(val_windows.size(),
                               at + static_cast<size_t>(windows_per_batch));
        val_nll += bc_nll_batch(
            policy, dataset,
            std::span<const BcWindow>(val_windows.data() + at, stop - at),
            false, nullptr);
        ++vbatches;
      }
      val_nll /= static_cast<double>(std::max<int64_t>(1, vbatches));
    }
    records.push_back({epoch + 1,
                       train_nll / static_cast<double>(std::max<int64_t>(1, batches)),
                       val_nll});
  }
  return records;
}

}  // namespace dm::train
