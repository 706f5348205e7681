#pragma once

#include <span>
#include <vector>

#include "dm/net.hpp"
#include "dm/policy.hpp"

namespace dm::trpo {

/// Baseline value estimator: small ELU MLP from observation to scalar.
class ValueFunction {
 public:
  ValueFunction(int obs_dim, uint64_t init_seed,
                std::vector<int64_t> widths = {64, 64});

  int obs_dim() const { return obs_dim_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  void set_normalization(policy::InputNormalization n);
  const policy::InputNormalization& normalization() const { return norm_; }

  nn::Tensor normalize(std::span<const std::vector<double>> obs) const;

  /// Graph over a normalized observation batch; result [N x 1].
  nn::Var build(nn::GraphParams& p, nn::Var obs) const;

  std::vector<double> predict(std::span<const std::vector<double>> obs) const;

 private:
  int obs_dim_ = 0;
  nn::ParamStore params_;
  nn::Mlp mlp_;
  policy::InputNormalization norm_;
};

struct ValueFitConfig {
  int epochs = 5;
  int minibatch = 256;
  double learning_rate = 1e-3;
};

/// Regression of the value function to `targets` by Adam; returns the
/// training loss per epoch. Throws InsufficientData on an empty batch.
std::vector<double> fit_value_function(
    ValueFunction& vf, std::span<const std::vector<double>> obs,
    std::span<const double> targets, const ValueFitConfig& cfg,
    RngStream& rng);

}  // namespace dm::trpo
