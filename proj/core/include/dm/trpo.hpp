#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>

#include "dm/policy.hpp"
#include "dm/rollout.hpp"
#include "dm/value_function.hpp"

namespace dm::trpo {

struct TrpoConfig {
  double delta_kl = 0.1;        // mean-KL trust region, nats
  double gae_lambda = 0.95;
  int cg_iters = 10;
  double cg_damping = 0.1;
  double backtrack_ratio = 0.8;
  int max_backtracks = 15;
};

struct TrpoDiagnostics {
  double surrogate_before = 0.0;
  double surrogate_after = 0.0;
  double kl = 0.0;
  double cg_residual = 0.0;
  double grad_norm = 0.0;
  int backtracks = 0;
  bool accepted = false;
};

/// One natural-gradient policy update: maximize the importance-sampled
/// advantage surrogate subject to mean KL <= delta_kl. Conjugate gradient
/// solves (F + damping I) x = g with exact Fisher-vector products (double
/// backprop through the KL gradient); backtracking accepts the first step
/// that improves the surrogate while keeping measured KL within the region.
/// Parameters are left unchanged when no step is accepted.
TrpoDiagnostics trpo_update(policy::GaussianPolicy& policy,
                            const RolloutBatch& batch,
                            std::span<const double> advantages,
                            const TrpoConfig& cfg);

/// Conjugate gradient for symmetric positive definite operators; returns
/// the solution and writes the final residual norm if requested.
Eigen::VectorXd conjugate_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& matvec,
    const Eigen::VectorXd& b, int iters, double* residual_out = nullptr);

/// Exact Fisher-vector product at the policy's current parameters,
/// F v = d/dtheta (grad_KL . v), computed on the given batch.
Eigen::VectorXd fisher_vector_product(policy::GaussianPolicy& policy,
                                      const RolloutBatch& batch,
                                      const Eigen::VectorXd& v,
                                      double damping);

}  // namespace dm::trpo
