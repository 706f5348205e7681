#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace dm::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig cfg, int64_t size);

  /// In-place update of `params` from `grads`; increments the step counter.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads);

  int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

  std::string serialize() const;
  void deserialize(const std::string& text);

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  int64_t t_ = 0;
};

}  // namespace dm::nn
