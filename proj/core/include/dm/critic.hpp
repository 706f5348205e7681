#pragma once

#include <deque>
#include <span>
#include <vector>

#include "dm/adam.hpp"
#include "dm/net.hpp"
#include "dm/policy.hpp"

namespace dm::critic {

enum class PairSource { Expert, PolicyRollout };

/// A block of (observation, action) pairs with provenance.
struct PairBlock {
  PairSource source = PairSource::PolicyRollout;
  std::vector<std::vector<double>> observations;
  nn::Tensor actions;  // N x 2

  size_t size() const { return observations.size(); }
};

/// Source of expert pairs; implementations sample lazily from the
/// demonstration data.
class ExpertSampler {
 public:
  virtual ~ExpertSampler() = default;
  virtual size_t size() const = 0;
  virtual PairBlock sample(int n, RngStream& rng) const = 0;
};

struct CriticConfig {
  std::vector<int64_t> widths = {128, 128, 64};
  double dropout = 0.2;
  double gp_coefficient = 2.0;
  double learning_rate = 4e-4;
  int batch_size = 2000;
  int epochs_per_iter = 40;
  int replay_iters = 3;
  double normalizer_decay = 0.99;
  int normalizer_warmup = 100;
  bool logistic = false;  // experimental plain-GAIL discriminator mode
};

/// Wasserstein critic over concatenated (observation, action); higher
/// scores mean more expert-like, and the score is the surrogate reward.
class CriticNet {
 public:
  CriticNet(int obs_dim, uint64_t init_seed, const CriticConfig& cfg);

  int obs_dim() const { return obs_dim_; }
  int input_dim() const { return obs_dim_ + policy::kActionDim; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const CriticConfig& config() const { return cfg_; }

  /// Input standardization over the joint (observation, action) vector.
  void set_normalization(policy::InputNormalization n);
  const policy::InputNormalization& normalization() const { return norm_; }

  nn::Tensor normalize_input(std::span<const std::vector<double>> obs,
                             const nn::Tensor& actions) const;

  /// Graph over normalized inputs. Dropout is applied only when `rng` is
  /// given (training passes); scoring runs deterministically without it.
  nn::Var build(nn::GraphParams& p, nn::Var input, RngStream* rng) const;

  /// Deterministic eval-mode scores.
  std::vector<double> score(std::span<const std::vector<double>> obs,
                            const nn::Tensor& actions) const;

 private:
  int obs_dim_ = 0;
  CriticConfig cfg_;
  nn::ParamStore params_;
  nn::Mlp mlp_;
  policy::InputNormalization norm_;
};

/// Ring of policy-rollout pairs spanning the most recent policy iterations.
/// Expert pairs are rejected (provenance assertion).
class ReplayMemory {
 public:
  explicit ReplayMemory(int capacity_iters = 3) : capacity_(capacity_iters) {}

  void push_iteration(PairBlock block);  // throws on expert-tagged blocks
  size_t size() const;
  int iterations_held() const { return static_cast<int>(blocks_.size()); }

  /// Uniform sample with replacement across all held pairs.
  PairBlock sample(int n, RngStream& rng) const;

  const std::deque<PairBlock>& blocks() const { return blocks_; }
  void restore(std::deque<PairBlock> blocks);

 private:
  int capacity_;
  std::deque<PairBlock> blocks_;
};

/// Running standardizer for the critic score stream (exponential moving
/// moments with bias correction). Raw scores pass through until the warmup
/// count is reached; the stream is only updated during training.
class RewardNormalizer {
 public:
  RewardNormalizer(double decay = 0.99, int warmup = 100)
      : decay_(decay), warmup_(warmup) {}

  void update(double raw_score);
  double normalize(double raw_score) const;
  int64_t count() const { return count_; }
  bool warmed() const { return count_ >= warmup_; }
  double mean() const;
  double variance() const;

  std::string serialize() const;
  void deserialize(const std::string& text);

 private:
  double decay_;
  int warmup_;
  double m1_ = 0.0;  // EMA of scores
  double m2_ = 0.0;  // EMA of squared scores
  int64_t count_ = 0;
};

/// Normalized surrogate reward for one pair; updates the normalizer from
/// the raw score stream when `training` is set.
double surrogate_reward(const CriticNet& critic, RewardNormalizer& normalizer,
                        double raw_score, bool training);

struct CriticDiagnostics {
  double wasserstein_gap = 0.0;   // mean expert score - mean policy score
  double gradient_penalty = 0.0;  // mean penalty term over the last epoch
  double loss = 0.0;
};

/// WGAN-GP training: for each epoch draw a half-expert / half-replay batch,
/// take one Adam step on
///   mean(score(policy)) - mean(score(expert))
///   + gp * mean((||grad_x score(x_hat)|| - 1)^2),
/// with x_hat = eps*expert + (1-eps)*policy per sample. Dropout is active
/// on the score terms and disabled inside the gradient-penalty pass.
CriticDiagnostics train_critic(CriticNet& critic, const ExpertSampler& expert,
                               ReplayMemory& replay, const CriticConfig& cfg,
                               nn::Adam& adam, RngStream& rng);

}  // namespace dm::critic
