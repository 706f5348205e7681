#include "dm/trpo.hpp"

#include <cmath>

namespace dm::trpo {

namespace {

struct BatchContext {
  nn::Tensor obs_norm;
  nn::Tensor hidden;
  nn::Tensor actions;
  nn::Tensor adv;       // N x 1
  nn::Tensor logp_old;  // N x 1
  nn::Tensor mu_old;    // N x 2
  Eigen::Vector2d log_std_old;
  std::vector<int> z;
  int64_t n = 0;
};

BatchContext prepare(const policy::GaussianPolicy& policy,
                     const RolloutBatch& batch,
                     std::span<const double> advantages) {
  BatchContext ctx;
  ctx.n = static_cast<int64_t>(batch.size());
  ctx.obs_norm = policy.normalize(batch.observations);
  ctx.hidden = batch.hidden_states;
  ctx.actions = batch.actions;
  ctx.z = batch.latent;
  ctx.adv = nn::Tensor(ctx.n, 1);
  ctx.logp_old = nn::Tensor(ctx.n, 1);
  for (int64_t i = 0; i < ctx.n; ++i) {
    ctx.adv[i] = advantages[static_cast<size_t>(i)];
    ctx.logp_old[i] = batch.log_probs[static_cast<size_t>(i)];
  }

  // Means under the collection-time parameters, used as KL constants.
  nn::Tape tape;
  nn::GraphParams p(tape, policy.params(), /*trainable=*/false);
  policy::PolicyEval eval =
      policy.build(p, tape.constant(ctx.obs_norm), tape.constant(ctx.hidden),
                   ctx.z);
  ctx.mu_old = tape.value(eval.mean);
  ctx.log_std_old = policy.log_std_values();
  return ctx;
}

struct ObjectiveEval {
  double surrogate = 0.0;
  double kl = 0.0;
};

// Numeric (gradient-free) evaluation at the policy's current parameters.
ObjectiveEval evaluate_objective(const policy::GaussianPolicy& policy,
                                 const BatchContext& ctx) {
  nn::Tape tape;
  nn::GraphParams p(tape, policy.params(), /*trainable=*/false);
  policy::PolicyEval eval =
      policy.build(p, tape.constant(ctx.obs_norm), tape.constant(ctx.hidden),
                   ctx.z);
  const nn::Tensor& mu = tape.value(eval.mean);
  Eigen::Vector2d log_std = policy.log_std_values();

  ObjectiveEval out;
  for (int64_t i = 0; i < ctx.n; ++i) {
    Eigen::Vector2d m(mu(i, 0), mu(i, 1));
    Eigen::Vector2d a(ctx.actions(i, 0), ctx.actions(i, 1));
    double logp = policy::gaussian_log_prob_value(m, log_std, a);
    out.surrogate += std::exp(logp - ctx.logp_old[i]) * ctx.adv[i];
  }
  out.surrogate /= static_cast<double>(ctx.n);
  out.kl = policy::gaussian_kl_value(ctx.mu_old, ctx.log_std_old, mu, log_std);
  return out;
}

Eigen::VectorXd flatten_grads(nn::Tape& tape, const std::vector<nn::Var>& grads,
                              int64_t total) {
  Eigen::VectorXd flat(total);
  int64_t at = 0;
  for (nn::Var g : grads) {
    const nn::Tensor& t = tape.value(g);
    for (int64_t i = 0; i < t.size(); ++i) flat[at++] = t[i];
  }
  return flat;
}

// Surrogate gradient at the current parameters.
Eigen::VectorXd surrogate_gradient(const policy::GaussianPolicy& policy,
                                   const BatchContext& ctx) {
  nn::Tape tape;
  nn::GraphParams p(tape, policy.params(), /*trainable=*/true);
  policy::PolicyEval eval =
      policy.build(p, tape.constant(ctx.obs_norm), tape.constant(ctx.hidden),
                   ctx.z);
  nn::Var logp = policy::gaussian_log_prob(tape, eval.mean, eval.log_std_row,
                                           tape.constant(ctx.actions));
  nn::Var ratio = tape.exp(tape.sub(logp, tape.constant(ctx.logp_old)));
  nn::Var surr =
      tape.scale(tape.sum(tape.mul(ratio, tape.constant(ctx.adv))),
                 1.0 / static_cast<double>(ctx.n));
  std::vector<nn::Var> params = p.all();
  std::vector<nn::Var> grads = tape.gradients(surr, params);
  return flatten_grads(tape, grads, policy.params().total_size());
}

Eigen::VectorXd fvp_on_context(const policy::GaussianPolicy& policy,
                               const BatchContext& ctx,
                               const Eigen::VectorXd& v, double damping) {
  nn::Tape tape;
  nn::GraphParams p(tape, policy.params(), /*trainable=*/true);
  policy::PolicyEval eval =
      policy.build(p, tape.constant(ctx.obs_norm), tape.constant(ctx.hidden),
                   ctx.z);
  nn::Var kl = tape.scale(
      tape.sum(policy::gaussian_kl(tape, ctx.mu_old, ctx.log_std_old,
                                   eval.mean, eval.log_std_row)),
      1.0 / static_cast<double>(ctx.n));
  std::vector<nn::Var> params = p.all();
  std::vector<nn::Var> kl_grads = tape.gradients(kl, params);

  // dot(grad_KL, v) as a graph node, then one more backward pass
  nn::Var dot_acc;
  int64_t at = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    const nn::Tensor& shape = tape.value(params[i]);
    nn::Tensor vi(shape.rows(), shape.cols());
    for (int64_t k = 0; k < vi.size(); ++k) vi[k] = v[at++];
    nn::Var term = tape.sum(tape.mul(kl_grads[i], tape.constant(std::move(vi))));
    dot_acc = dot_acc.valid() ? tape.add(dot_acc, term) : term;
  }
  std::vector<nn::Var> hv = tape.gradients(dot_acc, params);
  Eigen::VectorXd out =
      flatten_grads(tape, hv, policy.params().total_size());
  return out + damping * v;
}

}  // namespace

Eigen::VectorXd conjugate_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& matvec,
    const Eigen::VectorXd& b, int iters, double* residual_out) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b;
  Eigen::VectorXd p = b;
  double rr = r.squaredNorm();
  for (int i = 0; i < iters && rr > 1e-16; ++i) {
    Eigen::VectorXd ap = matvec(p);
    double alpha = rr / (p.dot(ap) + 1e-16);
    x += alpha * p;
    r -= alpha * ap;
    double rr_new = r.squaredNorm();
    p = r + (rr_new / (rr + 1e-16)) * p;
    rr = rr_new;
  }
  if (residual_out) *residual_out = std::sqrt(rr);
  return x;
}

Eigen::VectorXd fisher_vector_product(policy::GaussianPolicy& policy,
                                      const RolloutBatch& batch,
                                      const Eigen::VectorXd& v,
                                      double damping) {
  std::vector<double> zero_adv(batch.size(), 0.0);
  BatchContext ctx = prepare(policy, batch, zero_adv);
  return fvp_on_context(policy, ctx, v, damping);
}

TrpoDiagnostics trpo_update(policy::GaussianPolicy& policy,
                            const RolloutBatch& batch,
                            std::span<const double> advantages,
                            const TrpoConfig& cfg) {
  TrpoDiagnostics diag;
  if (batch.size() == 0) throw InsufficientData("trpo_update: empty batch");
  BatchContext ctx = prepare(policy, batch, advantages);

  Eigen::VectorXd g = surrogate_gradient(policy, ctx);
  if (!g.allFinite()) throw NonFiniteGradient("surrogate gradient");
  diag.grad_norm = g.norm();
  ObjectiveEval before = evaluate_objective(policy, ctx);
  diag.surrogate_before = before.surrogate;
  diag.surrogate_after = before.surrogate;
  if (diag.grad_norm < 1e-12) return diag;  // zero gradient: no step

  auto matvec = [&](const Eigen::VectorXd& v) {
    return fvp_on_context(policy, ctx, v, cfg.cg_damping);
  };
  Eigen::VectorXd x =
      conjugate_gradient(matvec, g, cfg.cg_iters, &diag.cg_residual);
  double xfx = x.dot(matvec(x));
  if (xfx <= 0 || !std::isfinite(xfx)) return diag;
  double beta = std::sqrt(2.0 * cfg.delta_kl / xfx);

  Eigen::VectorXd theta_old = policy.params().flatten();
  double step_scale = 1.0;
  for (int k = 0; k < cfg.max_backtracks; ++k) {
    policy.params().set_from_flat(theta_old + step_scale * beta * x);
    policy.clamp_log_std();
    ObjectiveEval cand = evaluate_objective(policy, ctx);
    if (std::isfinite(cand.surrogate) && std::isfinite(cand.kl) &&
        cand.surrogate > before.surrogate && cand.kl <= cfg.delta_kl) {
      diag.surrogate_after = cand.surrogate;
      diag.kl = cand.kl;
      diag.accepted = true;
      diag.backtracks = k;
      return diag;
    }
    step_scale *= cfg.backtrack_ratio;
  }
  policy.params().set_from_flat(theta_old);  // no acceptable step
  diag.backtracks = cfg.max_backtracks;
  return diag;
}

}  // namespace dm::trpo
