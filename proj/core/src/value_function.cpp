#include "dm/value_function.hpp"

#include <algorithm>
#include <numeric>

#include "dm/adam.hpp"

namespace dm::trpo {

ValueFunction::ValueFunction(int obs_dim, uint64_t init_seed,
                             std::vector<int64_t> widths)
    : obs_dim_(obs_dim) {
  RngStream rng = RngStream::substream(init_seed, "vf_init");
  mlp_ = nn::Mlp(params_, rng, "vf", obs_dim, widths, 1, nn::Activation::Elu);
  norm_ = policy::InputNormalization::identity(obs_dim);
}

void ValueFunction::set_normalization(policy::InputNormalization n) {
  if (static_cast<int>(n.mean.size()) != obs_dim_)
    throw LayoutMismatch("value function normalization dimension");
  norm_ = std::move(n);
}

nn::Tensor ValueFunction::normalize(
    std::span<const std::vector<double>> obs) const {
  nn::Tensor out(static_cast<int64_t>(obs.size()), obs_dim_);
  for (size_t r = 0; r < obs.size(); ++r) {
    if (static_cast<int>(obs[r].size()) != obs_dim_)
      throw LayoutMismatch("observation length mismatch in value function");
    for (int c = 0; c < obs_dim_; ++c) {
      out(static_cast<int64_t>(r), c) =
          (obs[r][static_cast<size_t>(c)] - norm_.mean[static_cast<size_t>(c)]) /
          norm_.std[static_cast<size_t>(c)];
    }
  }
  return out;
}

nn::Var ValueFunction::build(nn::GraphParams& p, nn::Var obs) const {
  return mlp_.apply(p, obs);
}

std::vector<double> ValueFunction::predict(
    std::span<const std::vector<double>> obs) const {
  if (obs.empty()) return {};
  nn::Tape tape;
  nn::GraphParams p(tape, params_, /*trainable=*/false);
  nn::Var out = build(p, tape.constant(normalize(obs)));
  const nn::Tensor& v = tape.value(out);
  std::vector<double> values(static_cast<size_t>(v.rows()));
  for (int64_t i = 0; i < v.rows(); ++i) values[static_cast<size_t>(i)] = v[i];
  return values;
}

std::vector<double> fit_value_function(ValueFunction& vf,
                                       std::span<const std::vector<double>> obs,
                                       std::span<const double> targets,
                                       const ValueFitConfig& cfg,
                                       RngStream& rng) {
  if (obs.empty() || targets.size() != obs.size())
    throw InsufficientData("fit_value_function: empty or mismatched batch");

  nn::Tensor obs_norm = vf.normalize(obs);
  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  nn::Adam adam(adam_cfg, vf.params().total_size());

  size_t n = obs.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});

  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    size_t batches = 0;
    for (size_t at = 0; at < n; at += static_cast<size_t>(cfg.minibatch)) {
      size_t stop = std::min(n, at + static_cast<size_t>(cfg.minibatch));
      int64_t bsize = static_cast<int64_t>(stop - at);
      nn::Tensor bx(bsize, obs_norm.cols());
      nn::Tensor by(bsize, 1);
      for (int64_t r = 0; r < bsize; ++r) {
        size_t src = order[at + static_cast<size_t>(r)];
        for (int64_t c = 0; c < obs_norm.cols(); ++c)
          bx(r, c) = obs_norm(static_cast<int64_t>(src), c);
        by(r, 0) = targets[src];
      }
      nn::Tape tape;
      nn::GraphParams p(tape, vf.params(), /*trainable=*/true);
      nn::Var pred = vf.build(p, tape.constant(std::move(bx)));
      nn::Var loss =
          tape.mean(tape.square(tape.sub(pred, tape.constant(std::move(by)))));
      loss_sum += tape.value(loss).scalar_value();
      ++batches;
      std::vector<nn::Var> params = p.all();
      std::vector<nn::Var> grads = tape.gradients(loss, params);
      Eigen::VectorXd flat(vf.params().total_size());
      int64_t atv = 0;
      for (nn::Var gvar : grads) {
        const nn::Tensor& t = tape.value(gvar);
        for (int64_t i = 0; i < t.size(); ++i) flat[atv++] = t[i];
      }
      Eigen::VectorXd theta = vf.params().flatten();
      adam.step(theta, flat);
      vf.params().set_from_flat(theta);
    }
    epoch_losses.push_back(loss_sum / static_cast<double>(std::max<size_t>(1, batches)));
  }
  return epoch_losses;
}

}  // namespace dm::trpo
