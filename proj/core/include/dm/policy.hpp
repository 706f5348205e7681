#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dm/checkpoint.hpp"
#include "dm/features.hpp"
#include "dm/net.hpp"
#include "dm/scene.hpp"

namespace dm::policy {

enum class TrunkKind {
  Mlp,       // feedforward stack plus one extra hidden layer
  GruTrunk,  // feedforward stack feeding a small GRU
  Gru,       // single GRU directly on the observation
};

const char* trunk_kind_name(TrunkKind k);
std::optional<TrunkKind> trunk_kind_from_name(const std::string& name);

struct LatentConfig {
  bool enabled = false;
  int count = 4;       // number of discrete codes
  int embed_width = 8; // learned embedding width, prepended to the input
  std::vector<double> prior;  // empty = uniform

  std::vector<double> effective_prior() const;
};

struct PolicyArch {
  TrunkKind trunk = TrunkKind::Gru;
  std::vector<int64_t> trunk_widths = {256, 128, 64, 48, 32};
  int64_t gru_units = 64;        // hidden size for TrunkKind::Gru
  int64_t trunk_gru_units = 32;  // hidden size for TrunkKind::GruTrunk
  double log_std_init = -1.0;
  LatentConfig latent;

  nlohmann::json to_json() const;
  static PolicyArch from_json(const nlohmann::json& j);
};

inline constexpr int kActionDim = 2;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// Per-feature affine input standardization, frozen after construction and
/// stored in checkpoints.
struct InputNormalization {
  std::vector<double> mean;
  std::vector<double> std;

  static InputNormalization identity(int dim);
  static InputNormalization from_data(std::span<const std::vector<double>> rows);
};

/// Graph handles produced by a policy forward pass.
struct PolicyEval {
  nn::Var mean;         // [N x 2]
  nn::Var log_std_row;  // [1 x 2]
};

/// Stochastic Gaussian policy: a trunk network producing the action mean
/// and a state-independent learned log standard deviation, clamped to
/// [-5, 2]. Latent-conditioned variants prepend a learned embedding of the
/// discrete code z to the observation.
class GaussianPolicy {
 public:
  GaussianPolicy(const PolicyArch& arch, int obs_dim, uint64_t init_seed);

  const PolicyArch& arch() const { return arch_; }
  int obs_dim() const { return obs_dim_; }
  int hidden_size() const { return hidden_size_; }
  bool latent() const { return arch_.latent.enabled; }

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  /// Project the log-std parameter back into its clamp range; call after
  /// every parameter update.
  void clamp_log_std();

  void set_normalization(InputNormalization n);
  const InputNormalization& normalization() const { return norm_; }

  /// Validate lengths and standardize a batch of raw observations.
  /// Throws LayoutMismatch when an observation length differs from obs_dim.
  nn::Tensor normalize(std::span<const std::vector<double>> obs) const;

  /// Build mean / log-std graph nodes. `obs` must be normalized, shape
  /// [N x obs_dim]; `hidden` [N x hidden_size] (ignored for MLP); `z` one
  /// code per row when latent is enabled, empty otherwise. When
  /// `hidden_out` is non-null the updated hidden state node is stored.
  PolicyEval build(nn::GraphParams& p, nn::Var obs, nn::Var hidden,
                   std::span<const int> z, nn::Var* hidden_out = nullptr) const;

  nn::Tensor initial_hidden(int n) const;

  struct ActOut {
    std::vector<sim::Action> actions;
    std::vector<double> log_prob;
    nn::Tensor hidden;  // updated recurrent state
    nn::Tensor mean;    // [N x 2]
  };

  /// Sample actions for a batch of agents sharing this parameter set.
  ActOut act(std::span<const std::vector<double>> obs, const nn::Tensor& hidden,
             std::span<const int> z, RngStream& rng) const;

  /// Closed-form mean differential entropy (state independent).
  double entropy() const;

  Eigen::Vector2d log_std_values() const;

 private:
  nn::Var input_graph_(nn::GraphParams& p, nn::Var obs,
                       std::span<const int> z) const;

  PolicyArch arch_;
  int obs_dim_ = 0;
  int hidden_size_ = 0;
  int64_t input_dim_ = 0;
  nn::ParamStore params_;
  InputNormalization norm_;
  std::vector<nn::Dense> trunk_;
  nn::GruCell gru_;
  nn::Dense head_;
};

/// Diagonal-Gaussian log density of `actions` under (mean, log_std) graph
/// nodes; result is [N x 1].
nn::Var gaussian_log_prob(nn::Tape& tape, nn::Var mean, nn::Var log_std_row,
                          nn::Var actions);

/// Per-sample KL(old || new) between diagonal Gaussians, old given as
/// constants; result is [N x 1].
nn::Var gaussian_kl(nn::Tape& tape, const nn::Tensor& mean_old,
                    const Eigen::Vector2d& log_std_old, nn::Var mean_new,
                    nn::Var log_std_new_row);

double gaussian_log_prob_value(const Eigen::Vector2d& mean,
                               const Eigen::Vector2d& log_std,
                               const Eigen::Vector2d& action);

/// Mean closed-form KL over a batch evaluated numerically (diagnostics).
double gaussian_kl_value(const nn::Tensor& mean_old,
                         const Eigen::Vector2d& log_std_old,
                         const nn::Tensor& mean_new,
                         const Eigen::Vector2d& log_std_new);

/// Checkpoint round-trip. The metadata records the architecture, the
/// observation layout, input normalization, the rng seed and config hash;
/// loading verifies the layout against `expected` (VersionMismatch).
nn::Checkpoint policy_to_checkpoint(const GaussianPolicy& policy,
                                    const feat::ObservationLayout& layout,
                                    nlohmann::json extra_metadata);
GaussianPolicy policy_from_checkpoint(
    const nn::Checkpoint& ckpt,
    const std::optional<feat::ObservationLayout>& expected);

}  // namespace dm::policy
