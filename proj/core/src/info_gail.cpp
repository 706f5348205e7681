#include "dm/info_gail.hpp"

#include <cmath>

namespace dm::train {

QNetwork::QNetwork(int obs_dim, int code_count, int64_t gru_units,
                   uint64_t init_seed)
    : obs_dim_(obs_dim), k_(code_count) {
  RngStream rng = RngStream::substream(init_seed, "qnet_init");
  gru_ = nn::GruCell(params_, rng, "q/gru", obs_dim + policy::kActionDim,
                     gru_units);
  head_ = nn::Dense(params_, rng, "q/head", gru_units, code_count);
  norm_ = policy::InputNormalization::identity(obs_dim + policy::kActionDim);
}

void QNetwork::set_normalization(policy::InputNormalization n) {
  if (static_cast<int>(n.mean.size()) != obs_dim_ + policy::kActionDim)
    throw LayoutMismatch("q network normalization dimension");
  norm_ = std::move(n);
}

nn::Tensor QNetwork::normalized_inputs_(const critic::PairBlock& seq) const {
  int64_t n = static_cast<int64_t>(seq.size());
  int64_t dim = obs_dim_ + policy::kActionDim;
  nn::Tensor out(n, dim);
  for (int64_t r = 0; r < n; ++r) {
    const auto& row = seq.observations[static_cast<size_t>(r)];
    if (static_cast<int>(row.size()) != obs_dim_)
      throw LayoutMismatch("q network observation length");
    for (int c = 0; c < obs_dim_; ++c) out(r, c) = row[static_cast<size_t>(c)];
    out(r, obs_dim_) = seq.actions(r, 0);
    out(r, obs_dim_ + 1) = seq.actions(r, 1);
    for (int64_t c = 0; c < dim; ++c)
      out(r, c) = (out(r, c) - norm_.mean[static_cast<size_t>(c)]) /
                  norm_.std[static_cast<size_t>(c)];
  }
  return out;
}

nn::Var QNetwork::logits_graph_(nn::GraphParams& p, nn::Var inputs_row,
                                nn::Var h, nn::Var* h_out) const {
  nn::Var h_new = gru_.step(p, inputs_row, h);
  if (h_out) *h_out = h_new;
  return head_.apply(p, h_new);
}

nn::Tensor QNetwork::log_posterior_prefixes(
    const critic::PairBlock& sequence) const {
  if (sequence.size() == 0) throw EmptySegment("empty trajectory");
  nn::Tensor inputs = normalized_inputs_(sequence);
  int64_t steps = inputs.rows();

  nn::Tape tape;
  nn::GraphParams p(tape, params_, /*trainable=*/false);
  nn::Var h = tape.constant(nn::Tensor(1, gru_.hidden_size(), 0.0));
  nn::Tensor out(steps, k_);
  for (int64_t t = 0; t < steps; ++t) {
    nn::Tensor row(1, inputs.cols());
    for (int64_t c = 0; c < inputs.cols(); ++c) row(0, c) = inputs(t, c);
    nn::Var logits = logits_graph_(p, tape.constant(std::move(row)), h, &h);
    nn::Var logq = tape.sub(
        logits, tape.broadcast_col(tape.log_sum_exp_rows(logits), k_));
    const nn::Tensor& v = tape.value(logq);
    for (int c = 0; c < k_; ++c) out(t, c) = v(0, c);
  }
  return out;
}

Eigen::VectorXd QNetwork::posterior(const critic::PairBlock& segment) const {
  if (segment.size() == 0)
    throw EmptySegment("burn-in segment must hold at least one step");
  nn::Tensor logq = log_posterior_prefixes(segment);
  Eigen::VectorXd out(k_);
  for (int c = 0; c < k_; ++c)
    out[c] = std::exp(logq(logq.rows() - 1, c));
  out /= out.sum();
  return out;
}

double QNetwork::train_step(std::span<const critic::PairBlock> sequences,
                            std::span<const int> codes, nn::Adam& adam) {
  if (sequences.empty() || codes.size() != sequences.size())
    throw InsufficientData("q train step needs labeled sequences");

  nn::Tape tape;
  nn::GraphParams p(tape, params_, /*trainable=*/true);
  nn::Var total;
  int64_t count = 0;
  for (size_t i = 0; i < sequences.size(); ++i) {
    const critic::PairBlock& seq = sequences[i];
    if (seq.size() == 0) throw EmptySegment("empty training sequence");
    nn::Tensor inputs = normalized_inputs_(seq);
    nn::Var h = tape.constant(nn::Tensor(1, gru_.hidden_size(), 0.0));
    nn::Tensor pick(1, k_, 0.0);
    pick(0, codes[i]) = 1.0;
    nn::Var mask = tape.constant(std::move(pick));
    for (int64_t t = 0; t < inputs.rows(); ++t) {
      nn::Tensor row(1, inputs.cols());
      for (int64_t c = 0; c < inputs.cols(); ++c) row(0, c) = inputs(t, c);
      nn::Var logits = logits_graph_(p, tape.constant(std::move(row)), h, &h);
      nn::Var logq = tape.sub(
          logits, tape.broadcast_col(tape.log_sum_exp_rows(logits), k_));
      nn::Var ll = tape.sum(tape.mul(logq, mask));
      total = total.valid() ? tape.add(total, ll) : ll;
      ++count;
    }
  }
  nn::Var nll = tape.scale(total, -1.0 / static_cast<double>(count));
  double loss = tape.value(nll).scalar_value();

  std::vector<nn::Var> pvars = p.all();
  std::vector<nn::Var> grads = tape.gradients(nll, pvars);
  Eigen::VectorXd flat(params_.total_size());
  int64_t at = 0;
  for (nn::Var g : grads) {
    const nn::Tensor& t = tape.value(g);
    for (int64_t i = 0; i < t.size(); ++i) flat[at++] = t[i];
  }
  if (!flat.allFinite()) throw NonFiniteGradient("q network gradient");
  Eigen::VectorXd theta = params_.flatten();
  adam.step(theta, flat);
  params_.set_from_flat(theta);
  return loss;
}

double prior_entropy(std::span<const double> prior) {
  double h = 0.0;
  for (double p : prior)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

double info_lower_bound(const QNetwork& q,
                        std::span<const critic::PairBlock> trajectories,
                        std::span<const int> codes,
                        std::span<const double> prior) {
  if (trajectories.empty())
    throw InsufficientData("info_lower_bound needs trajectories");
  double mean_logq = 0.0;
  for (size_t i = 0; i < trajectories.size(); ++i) {
    nn::Tensor logq = q.log_posterior_prefixes(trajectories[i]);
    mean_logq += logq(logq.rows() - 1, codes[i]);
  }
  mean_logq /= static_cast<double>(trajectories.size());
  return mean_logq + prior_entropy(prior);
}

Eigen::VectorXd burn_in_infer(const QNetwork& encoder,
                              const critic::PairBlock& segment) {
  return encoder.posterior(segment);
}

}  // namespace dm::train
