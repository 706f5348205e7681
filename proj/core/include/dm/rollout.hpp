#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dm/tensor.hpp"

namespace dm::trpo {

/// Flat batch of per-(agent, timestep) samples. Each controlled agent's
/// trajectory within one environment episode forms a contiguous run closed
/// by a done flag, so multi-agent episodes contribute several runs.
struct RolloutBatch {
  std::vector<std::vector<double>> observations;
  nn::Tensor actions;            // N x 2, raw sampled actions
  std::vector<double> log_probs;  // recorded at collection time
  std::vector<double> rewards;
  std::vector<uint8_t> dones;
  nn::Tensor hidden_states;      // N x H recurrent state before the step
  std::vector<int> latent;       // per-step z; empty without latent codes

  // bookkeeping
  std::vector<int> agent_ids;
  std::vector<int64_t> episode_ids;

  // world-side measurements for penalties and event metrics
  std::vector<double> applied_accel;  // clamped acceleration actually applied
  std::vector<double> d_road;         // edge distance after the step
  std::vector<double> d_c;            // min body distance after the step
  std::vector<double> raw_scores;     // critic scores before normalization

  size_t size() const { return observations.size(); }

  /// Contiguous [begin, end) index ranges of the trajectory runs.
  std::vector<std::pair<size_t, size_t>> episode_ranges() const;
};

/// Backward recursion R_t = r_t + gamma * R_{t+1}, reset at episode ends.
std::vector<double> discounted_returns(std::span<const double> rewards,
                                       std::span<const uint8_t> dones,
                                       double gamma);

/// Generalized advantage estimation over the batch. `values` holds V(o_t)
/// aligned with rewards; episode ends never bootstrap. When `normalize` is
/// set the result is shifted/scaled to zero mean, unit variance.
std::vector<double> gae_advantages(std::span<const double> rewards,
                                   std::span<const uint8_t> dones,
                                   std::span<const double> values,
                                   double gamma, double lambda,
                                   bool normalize = true);

}  // namespace dm::trpo
