#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include "dm/adam.hpp"
#include "dm/env.hpp"
#include "dm/info_gail.hpp"
#include "dm/penalty.hpp"
#include "dm/rollout.hpp"
#include "dm/trpo.hpp"
#include "dm/value_function.hpp"

namespace dm::train {

struct PhaseConfig {
  int iterations = 1000;
  double gamma = 0.95;
  int batch_size = 10000;  // observation-action pairs per update
};

struct TrainPhases {
  PhaseConfig phase1{1000, 0.95, 10000};
  PhaseConfig phase2{200, 0.99, 40000};
  bool run_phase2 = true;

  int64_t total_iterations() const {
    return phase1.iterations + (run_phase2 ? phase2.iterations : 0);
  }
};

struct AlgoSettings {
  bool use_curriculum = false;  // agent count follows the schedule
  bool penalty_enabled = false; // subtract scaled road penalties
  bool info_enabled = false;    // latent code posterior reward + Q updates
  bool burn_in = false;         // draw z from the burn-in encoder posterior
  int fixed_agents = 1;         // agent count without a curriculum
};

/// Per-iteration training record; the (policy_hash, critic_hash) pair is the
/// update trace used by the reduction equality tests.
struct IterationRecord {
  int64_t iteration = 0;
  int phase = 1;
  int m_agents = 1;
  int64_t episodes = 0;
  int64_t pairs = 0;
  double reward_raw_mean = 0;
  double reward_mean = 0;
  double penalty_mean = 0;
  double info_bonus_mean = 0;
  double critic_gap = 0;
  double critic_grad_penalty = 0;
  double critic_loss = 0;
  double surrogate_before = 0;
  double surrogate_after = 0;
  double kl = 0;
  double entropy = 0;
  int backtracks = 0;
  bool accepted = false;
  double vf_loss = 0;
  double q_nll = 0;
  double collision_frac = 0;
  double offroad_frac = 0;
  double hard_brake_frac = 0;
  uint64_t policy_hash = 0;
  uint64_t critic_hash = 0;
};

struct TrainerSetup {
  const io::TrajectoryData* demos = nullptr;
  EnvConfig env;
  policy::PolicyArch arch;
  TrainPhases phases;
  CurriculumSchedule curriculum;
  PenaltyConfig penalty;
  InfoGailConfig info;
  trpo::TrpoConfig trpo_cfg;
  trpo::ValueFitConfig vf_fit;
  critic::CriticConfig critic_cfg;
  AlgoSettings algo;
  uint64_t master_seed = 0;
  std::filesystem::path out_dir;  // empty: in-memory only (tests)
  int checkpoint_period = 50;
  bool resume = false;
  int64_t norm_sample = 20000;  // expert pairs for input standardization
  std::string algo_name = "gail";
  uint64_t config_hash = 0;
};

/// The shared adversarial training engine. GAIL, PS-GAIL, RAIL, InfoGAIL
/// and Burn-InfoGAIL are configurations of this one loop, which makes the
/// reduction identities between them directly testable.
class AdversarialTrainer {
 public:
  explicit AdversarialTrainer(TrainerSetup setup);
  ~AdversarialTrainer();

  /// Full run over the configured phases, with checkpoints and metrics when
  /// an output directory is set. Resumes from state_latest when requested.
  void run();

  /// Run exactly `n` more iterations (test hook).
  void run_iterations(int n);

  policy::GaussianPolicy& policy() { return *policy_; }
  const policy::GaussianPolicy& policy() const { return *policy_; }
  critic::CriticNet& critic_net() { return *critic_; }
  trpo::ValueFunction& value_function() { return *vf_; }
  QNetwork* q_network() { return qnet_.get(); }
  const critic::RewardNormalizer& normalizer() const { return normalizer_; }
  const std::vector<IterationRecord>& records() const { return records_; }
  int64_t iteration() const { return iteration_; }
  const feat::ObservationLayout& layout() const { return layout_; }

  nn::Checkpoint policy_checkpoint() const;

 private:
  struct TrajectorySlice {
    size_t begin;
    size_t end;
    int code;
  };

  /// Row-major growable buffers filled during collection; turned into one
  /// RolloutBatch per iteration.
  struct Staging {
    std::vector<std::vector<double>> observations;
    std::vector<double> actions;   // 2 per row
    std::vector<double> hiddens;   // hidden_size per row
    std::vector<double> log_probs;
    std::vector<uint8_t> dones;
    std::vector<int> latent;
    std::vector<int> agent_ids;
    std::vector<int64_t> episode_ids;
    std::vector<double> applied_accel, d_road, d_c;
    size_t count = 0;

    trpo::RolloutBatch materialize(int hidden_size);
  };

  void iterate_();
  void collect_episode_(int m, Staging& staging,
                        std::vector<TrajectorySlice>& slices);
  int sample_latent_(const std::vector<double>& probs, RngStream& rng) const;
  void write_metrics_row_(const IterationRecord& rec);
  void save_state_() const;
  bool try_restore_state_();
  void write_policy_checkpoint_(const std::string& name) const;
  void update_q_network_(const trpo::RolloutBatch& batch,
                         const std::vector<TrajectorySlice>& slices,
                         IterationRecord& rec);

  TrainerSetup setup_;
  feat::ObservationLayout layout_;
  std::unique_ptr<io::ExpertDataset> expert_;
  std::unique_ptr<DrivingEnv> env_;
  std::unique_ptr<policy::GaussianPolicy> policy_;
  std::unique_ptr<trpo::ValueFunction> vf_;
  std::unique_ptr<critic::CriticNet> critic_;
  std::unique_ptr<QNetwork> qnet_;
  critic::ReplayMemory replay_;
  critic::RewardNormalizer normalizer_;
  nn::Adam critic_adam_;
  nn::Adam q_adam_;
  RngStream sampler_rng_;
  RngStream critic_rng_;
  RngStream vf_rng_;
  RngStream qnet_rng_;
  int64_t episode_counter_ = 0;
  int64_t iteration_ = 0;
  std::vector<IterationRecord> records_;
  std::vector<double> latent_prior_;
};

uint64_t hash_params(const nn::ParamStore& params);

// ---- behavioral cloning ----

struct BcConfig {
  int epochs = 50;
  double learning_rate = 1e-3;
  int minibatch = 256;
  int subseq_len = 20;         // BPTT window for recurrent policies
  double val_fraction = 0.1;   // fraction of tracks held out
  int64_t max_pairs = 200000;  // cap on materialized training pairs
};

struct BcRecord {
  int epoch = 0;
  double train_nll = 0;
  double val_nll = 0;
};

/// Maximum-likelihood imitation of expert actions. Recurrent policies train
/// over fixed-length sub-sequences with hidden state reset per window.
/// Sets the policy's input normalization from the training split.
std::vector<BcRecord> train_bc(policy::GaussianPolicy& policy,
                               const io::ExpertDataset& dataset,
                               const BcConfig& cfg, uint64_t master_seed);

}  // namespace dm::train
