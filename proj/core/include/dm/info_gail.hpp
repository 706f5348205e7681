#pragma once

#include <span>
#include <vector>

#include "dm/adam.hpp"
#include "dm/critic.hpp"
#include "dm/net.hpp"
#include "dm/policy.hpp"

namespace dm::train {

struct InfoGailConfig {
  double lambda = 0.1;        // information reward weight
  int code_count = 4;         // K
  int burn_in_length = 50;    // steps of the conditioning segment
  int64_t gru_units = 64;
  double learning_rate = 1e-3;
  int rollout_updates_per_iter = 4;    // ML steps on rollout (traj, z) pairs
  int supervised_updates_per_iter = 4; // ML steps on labeled demo segments
  int sequences_per_update = 16;
};

/// Recurrent posterior network Q(z | trajectory prefix): a GRU over
/// (observation, action) pairs with a softmax head. Doubles as the burn-in
/// encoder, trained jointly on rollout latents and style-labeled
/// demonstration segments.
class QNetwork {
 public:
  QNetwork(int obs_dim, int code_count, int64_t gru_units, uint64_t init_seed);

  int obs_dim() const { return obs_dim_; }
  int code_count() const { return k_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  void set_normalization(policy::InputNormalization n);  // over (obs, action)
  const policy::InputNormalization& normalization() const { return norm_; }

  /// Log posterior over codes after every prefix of one trajectory: [T x K].
  nn::Tensor log_posterior_prefixes(const critic::PairBlock& sequence) const;

  /// Posterior after the full segment; throws EmptySegment on length 0.
  Eigen::VectorXd posterior(const critic::PairBlock& segment) const;

  /// One Adam step of maximum likelihood on (sequence, code) pairs; the
  /// per-sequence loss averages -log Q(z | prefix_t) over all prefixes.
  /// Returns the batch NLL.
  double train_step(std::span<const critic::PairBlock> sequences,
                    std::span<const int> codes, nn::Adam& adam);

 private:
  nn::Var logits_graph_(nn::GraphParams& p, nn::Var inputs_row, nn::Var h,
                        nn::Var* h_out) const;
  nn::Tensor normalized_inputs_(const critic::PairBlock& seq) const;

  int obs_dim_ = 0;
  int k_ = 0;
  nn::ParamStore params_;
  nn::GruCell gru_;
  nn::Dense head_;
  policy::InputNormalization norm_;
};

/// Variational lower bound on the mutual information between codes and
/// trajectories: L_I = mean log Q(z | tau) + H(prior).
double info_lower_bound(const QNetwork& q,
                        std::span<const critic::PairBlock> trajectories,
                        std::span<const int> codes,
                        std::span<const double> prior);

/// Posterior over codes inferred from a burn-in segment (argmax is taken by
/// callers at evaluation time).
Eigen::VectorXd burn_in_infer(const QNetwork& encoder,
                              const critic::PairBlock& segment);

double prior_entropy(std::span<const double> prior);

}  // namespace dm::train
