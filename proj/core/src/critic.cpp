#include "dm/critic.hpp"

#include <cmath>
#include <sstream>

namespace dm::critic {

CriticNet::CriticNet(int obs_dim, uint64_t init_seed, const CriticConfig& cfg)
    : obs_dim_(obs_dim), cfg_(cfg) {
  RngStream rng = RngStream::substream(init_seed, "critic_init");
  mlp_ = nn::Mlp(params_, rng, "critic", input_dim(), cfg.widths, 1,
                 nn::Activation::Relu);
  norm_ = policy::InputNormalization::identity(input_dim());
}

void CriticNet::set_normalization(policy::InputNormalization n) {
  if (static_cast<int>(n.mean.size()) != input_dim())
    throw LayoutMismatch("critic normalization dimension");
  norm_ = std::move(n);
}

nn::Tensor CriticNet::normalize_input(
    std::span<const std::vector<double>> obs, const nn::Tensor& actions) const {
  int64_t n = static_cast<int64_t>(obs.size());
  if (actions.rows() != n || actions.cols() != policy::kActionDim)
    throw ShapeMismatch("critic: action batch shape");
  nn::Tensor out(n, input_dim());
  for (int64_t r = 0; r < n; ++r) {
    const auto& row = obs[static_cast<size_t>(r)];
    if (static_cast<int>(row.size()) != obs_dim_)
      throw LayoutMismatch("critic: observation length mismatch");
    for (int c = 0; c < obs_dim_; ++c)
      out(r, c) = row[static_cast<size_t>(c)];
    out(r, obs_dim_) = actions(r, 0);
    out(r, obs_dim_ + 1) = actions(r, 1);
    for (int c = 0; c < input_dim(); ++c) {
      out(r, c) = (out(r, c) - norm_.mean[static_cast<size_t>(c)]) /
                  norm_.std[static_cast<size_t>(c)];
    }
  }
  return out;
}

nn::Var CriticNet::build(nn::GraphParams& p, nn::Var input,
                         RngStream* rng) const {
  if (rng && cfg_.dropout > 0.0)
    return mlp_.apply_dropout(p, input, cfg_.dropout, *rng);
  return mlp_.apply(p, input);
}

std::vector<double> CriticNet::score(std::span<const std::vector<double>> obs,
                                     const nn::Tensor& actions) const {
  if (obs.empty()) return {};
  nn::Tape tape;
  nn::GraphParams p(tape, params_, /*trainable=*/false);
  nn::Var out = build(p, tape.constant(normalize_input(obs, actions)), nullptr);
  const nn::Tensor& v = tape.value(out);
  std::vector<double> scores(static_cast<size_t>(v.rows()));
  for (int64_t i = 0; i < v.rows(); ++i) scores[static_cast<size_t>(i)] = v[i];
  return scores;
}

void ReplayMemory::push_iteration(PairBlock block) {
  if (block.source != PairSource::PolicyRollout)
    throw InsufficientData("replay memory only accepts policy rollout pairs");
  blocks_.push_back(std::move(block));
  while (static_cast<int>(blocks_.size()) > capacity_) blocks_.pop_front();
}

size_t ReplayMemory::size() const {
  size_t n = 0;
  for (const auto& b : blocks_) n += b.size();
  return n;
}

PairBlock ReplayMemory::sample(int n, RngStream& rng) const {
  size_t total = size();
  if (total == 0) throw InsufficientData("replay memory is empty");
  PairBlock out;
  out.source = PairSource::PolicyRollout;
  out.observations.reserve(static_cast<size_t>(n));
  out.actions = nn::Tensor(n, policy::kActionDim);
  for (int i = 0; i < n; ++i) {
    size_t pick = static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(total) - 1));
    for (const auto& b : blocks_) {
      if (pick < b.size()) {
        out.observations.push_back(b.observations[pick]);
        out.actions(i, 0) = b.actions(static_cast<int64_t>(pick), 0);
        out.actions(i, 1) = b.actions(static_cast<int64_t>(pick), 1);
        break;
      }
      pick -= b.size();
    }
  }
  return out;
}

void ReplayMemory::restore(std::deque<PairBlock> blocks) {
  blocks_ = std::move(blocks);
  while (static_cast<int>(blocks_.size()) > capacity_) blocks_.pop_front();
}

void RewardNormalizer::update(double raw_score) {
  ++count_;
  m1_ = decay_ * m1_ + (1.0 - decay_) * raw_score;
  m2_ = decay_ * m2_ + (1.0 - decay_) * raw_score * raw_score;
}

double RewardNormalizer::mean() const {
  if (count_ == 0) return 0.0;
  double bias = 1.0 - std::pow(decay_, static_cast<double>(count_));
  return m1_ / bias;
}

double RewardNormalizer::variance() const {
  if (count_ == 0) return 1.0;
  double bias = 1.0 - std::pow(decay_, static_cast<double>(count_));
  double m = m1_ / bias;
  return std::max(1e-8, m2_ / bias - m * m);
}

double RewardNormalizer::normalize(double raw_score) const {
  if (!warmed()) return raw_score;
  return (raw_score - mean()) / std::sqrt(variance() + 1e-8);
}

std::string RewardNormalizer::serialize() const {
  std::ostringstream os;
  os.precision(17);
  os << decay_ << " " << warmup_ << " " << m1_ << " " << m2_ << " " << count_;
  return os.str();
}

void RewardNormalizer::deserialize(const std::string& text) {
  std::istringstream is(text);
  is >> decay_ >> warmup_ >> m1_ >> m2_ >> count_;
  if (is.fail()) throw CorruptCheckpoint("bad reward normalizer state");
}

double surrogate_reward(const CriticNet& critic, RewardNormalizer& normalizer,
                        double raw_score, bool training) {
  (void)critic;
  if (training) normalizer.update(raw_score);
  return normalizer.normalize(raw_score);
}

namespace {

// softplus(x) = max(x, 0) + log1p(exp(-|x|)), composed from primitives so
// the logistic mode stays differentiable.
nn::Var softplus(nn::Tape& t, nn::Var x) {
  const nn::Tensor& v = t.value(x);
  nn::Tensor sign(v.rows(), v.cols());
  for (int64_t i = 0; i < v.size(); ++i) sign[i] = v[i] >= 0.0 ? 1.0 : -1.0;
  nn::Var abs_x = t.mul(x, t.constant(std::move(sign)));
  return t.add(t.relu(x), t.log(t.shift(t.exp(t.neg(abs_x)), 1.0)));
}

}  // namespace

CriticDiagnostics train_critic(CriticNet& critic, const ExpertSampler& expert,
                               ReplayMemory& replay, const CriticConfig& cfg,
                               nn::Adam& adam, RngStream& rng) {
  int half = cfg.batch_size / 2;
  if (static_cast<int>(expert.size()) < half)
    throw InsufficientData("expert set smaller than half the critic batch");
  if (static_cast<int>(replay.size()) < half)
    throw InsufficientData("replay memory smaller than half the critic batch");

  CriticDiagnostics diag;
  for (int epoch = 0; epoch < cfg.epochs_per_iter; ++epoch) {
    PairBlock e = expert.sample(half, rng);
    if (e.source != PairSource::Expert)
      throw InsufficientData("expert sampler returned non-expert pairs");
    PairBlock p = replay.sample(half, rng);

    nn::Tensor xe = critic.normalize_input(e.observations, e.actions);
    nn::Tensor xp = critic.normalize_input(p.observations, p.actions);

    nn::Tape tape;
    nn::GraphParams params(tape, critic.params(), /*trainable=*/true);
    nn::Var score_e = critic.build(params, tape.constant(xe), &rng);
    nn::Var score_p = critic.build(params, tape.constant(xp), &rng);
    nn::Var mean_e = tape.mean(score_e);
    nn::Var mean_p = tape.mean(score_p);

    nn::Var loss;
    double penalty_value = 0.0;
    if (!cfg.logistic) {
      // interpolates x_hat = eps*expert + (1-eps)*policy, per sample
      nn::Tensor hat(half, xe.cols());
      for (int64_t r = 0; r < half; ++r) {
        double eps = rng.uniform();
        for (int64_t c = 0; c < xe.cols(); ++c)
          hat(r, c) = eps * xe(r, c) + (1.0 - eps) * xp(r, c);
      }
      nn::Var x_hat = tape.variable(std::move(hat));
      // dropout stays off in this pass: the penalty needs a deterministic map
      nn::Var score_hat = critic.build(params, x_hat, nullptr);
      nn::Var grad_x = tape.gradients(tape.sum(score_hat), {x_hat})[0];
      nn::Var norm = tape.sqrt(
          tape.shift(tape.row_sum(tape.square(grad_x)), 1e-12));
      nn::Var penalty = tape.mean(tape.square(tape.shift(norm, -1.0)));
      penalty_value = tape.value(penalty).scalar_value();
      loss = tape.add(tape.sub(mean_p, mean_e),
                      tape.scale(penalty, cfg.gp_coefficient));
    } else {
      // plain discriminator: minimize softplus(-l_p) + softplus(l_e)
      nn::Var lp = tape.mean(softplus(tape, tape.neg(score_p)));
      nn::Var le = tape.mean(softplus(tape, score_e));
      loss = tape.add(lp, le);
    }

    diag.loss = tape.value(loss).scalar_value();
    diag.wasserstein_gap =
        tape.value(mean_e).scalar_value() - tape.value(mean_p).scalar_value();
    diag.gradient_penalty = penalty_value;

    std::vector<nn::Var> pvars = params.all();
    std::vector<nn::Var> grads = tape.gradients(loss, pvars);
    Eigen::VectorXd flat(critic.params().total_size());
    int64_t at = 0;
    for (nn::Var gvar : grads) {
      const nn::Tensor& t = tape.value(gvar);
      for (int64_t i = 0; i < t.size(); ++i) flat[at++] = t[i];
    }
    if (!flat.allFinite()) throw NonFiniteGradient("critic gradient");
    Eigen::VectorXd theta = critic.params().flatten();
    adam.step(theta, flat);
    critic.params().set_from_flat(theta);
  }
  return diag;
}

}  // namespace dm::critic
