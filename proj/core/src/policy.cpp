#include "dm/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dm::policy {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
}

const char* trunk_kind_name(TrunkKind k) {
  switch (k) {
    case TrunkKind::Mlp: return "mlp";
    case TrunkKind::GruTrunk: return "gru_trunk";
    case TrunkKind::Gru: return "gru";
  }
  return "unknown";
}

std::optional<TrunkKind> trunk_kind_from_name(const std::string& name) {
  if (name == "mlp") return TrunkKind::Mlp;
  if (name == "gru_trunk") return TrunkKind::GruTrunk;
  if (name == "gru") return TrunkKind::Gru;
  return std::nullopt;
}

std::vector<double> LatentConfig::effective_prior() const {
  if (!prior.empty()) {
    if (static_cast<int>(prior.size()) != count)
      throw ConfigError("latent prior size does not match code count");
    return prior;
  }
  return std::vector<double>(static_cast<size_t>(count),
                             1.0 / static_cast<double>(count));
}

nlohmann::json PolicyArch::to_json() const {
  nlohmann::json j;
  j["trunk"] = trunk_kind_name(trunk);
  j["trunk_widths"] = trunk_widths;
  j["gru_units"] = gru_units;
  j["trunk_gru_units"] = trunk_gru_units;
  j["log_std_init"] = log_std_init;
  j["latent"] = {{"enabled", latent.enabled},
                 {"count", latent.count},
                 {"embed_width", latent.embed_width},
                 {"prior", latent.prior}};
  return j;
}

PolicyArch PolicyArch::from_json(const nlohmann::json& j) {
  PolicyArch a;
  auto kind = trunk_kind_from_name(j.at("trunk").get<std::string>());
  if (!kind) throw VersionMismatch("unknown policy trunk kind");
  a.trunk = *kind;
  a.trunk_widths = j.at("trunk_widths").get<std::vector<int64_t>>();
  a.gru_units = j.at("gru_units").get<int64_t>();
  a.trunk_gru_units = j.at("trunk_gru_units").get<int64_t>();
  a.log_std_init = j.at("log_std_init").get<double>();
  const auto& l = j.at("latent");
  a.latent.enabled = l.at("enabled").get<bool>();
  a.latent.count = l.at("count").get<int>();
  a.latent.embed_width = l.at("embed_width").get<int>();
  a.latent.prior = l.at("prior").get<std::vector<double>>();
  return a;
}

InputNormalization InputNormalization::identity(int dim) {
  InputNormalization n;
  n.mean.assign(static_cast<size_t>(dim), 0.0);
  n.std.assign(static_cast<size_t>(dim), 1.0);
  return n;
}

InputNormalization InputNormalization::from_data(
    std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw InsufficientData("normalization needs data");
  size_t dim = rows.front().size();
  InputNormalization n;
  n.mean.assign(dim, 0.0);
  n.std.assign(dim, 0.0);
  for (const auto& r : rows) {
    for (size_t i = 0; i < dim; ++i) n.mean[i] += r[i];
  }
  for (double& m : n.mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (size_t i = 0; i < dim; ++i) {
      double d = r[i] - n.mean[i];
      n.std[i] += d * d;
    }
  }
  for (double& s : n.std)
    s = std::max(1e-3, std::sqrt(s / static_cast<double>(rows.size())));
  return n;
}

GaussianPolicy::GaussianPolicy(const PolicyArch& arch, int obs_dim,
                               uint64_t init_seed)
    : arch_(arch), obs_dim_(obs_dim) {
  RngStream rng = RngStream::substream(init_seed, "policy_init");
  input_dim_ = obs_dim;
  if (arch_.latent.enabled) {
    input_dim_ += arch_.latent.embed_width;
    params_.add("embed",
                nn::init_uniform_fanin(rng, arch_.latent.count,
                                       arch_.latent.embed_width));
  }

  int64_t feat = input_dim_;
  if (arch_.trunk != TrunkKind::Gru) {
    std::vector<int64_t> widths = arch_.trunk_widths;
    if (arch_.trunk == TrunkKind::Mlp) widths.push_back(widths.back());
    for (size_t i = 0; i < widths.size(); ++i) {
      trunk_.emplace_back(params_, rng, "trunk/h" + std::to_string(i), feat,
                          widths[i]);
      feat = widths[i];
    }
  }
  switch (arch_.trunk) {
    case TrunkKind::Mlp:
      hidden_size_ = 0;
      break;
    case TrunkKind::GruTrunk:
      gru_ = nn::GruCell(params_, rng, "gru", feat, arch_.trunk_gru_units);
      feat = arch_.trunk_gru_units;
      hidden_size_ = static_cast<int>(arch_.trunk_gru_units);
      break;
    case TrunkKind::Gru:
      gru_ = nn::GruCell(params_, rng, "gru", feat, arch_.gru_units);
      feat = arch_.gru_units;
      hidden_size_ = static_cast<int>(arch_.gru_units);
      break;
  }
  head_ = nn::Dense(params_, rng, "head", feat, kActionDim);
  params_.add("log_std",
              nn::Tensor(1, kActionDim, arch_.log_std_init));
  norm_ = InputNormalization::identity(obs_dim);
}

void GaussianPolicy::clamp_log_std() {
  nn::Tensor& ls = params_.at("log_std");
  for (int64_t i = 0; i < ls.size(); ++i)
    ls[i] = std::clamp(ls[i], kLogStdMin, kLogStdMax);
}

void GaussianPolicy::set_normalization(InputNormalization n) {
  if (static_cast<int>(n.mean.size()) != obs_dim_ ||
      static_cast<int>(n.std.size()) != obs_dim_)
    throw LayoutMismatch("normalization dimension != observation dimension");
  norm_ = std::move(n);
}

nn::Tensor GaussianPolicy::normalize(
    std::span<const std::vector<double>> obs) const {
  nn::Tensor out(static_cast<int64_t>(obs.size()), obs_dim_);
  for (size_t r = 0; r < obs.size(); ++r) {
    if (static_cast<int>(obs[r].size()) != obs_dim_)
      throw LayoutMismatch("observation length " +
                           std::to_string(obs[r].size()) + ", policy expects " +
                           std::to_string(obs_dim_));
    for (int c = 0; c < obs_dim_; ++c) {
      out(static_cast<int64_t>(r), c) =
          (obs[r][static_cast<size_t>(c)] - norm_.mean[static_cast<size_t>(c)]) /
          norm_.std[static_cast<size_t>(c)];
    }
  }
  return out;
}

nn::Var GaussianPolicy::input_graph_(nn::GraphParams& p, nn::Var obs,
                                     std::span<const int> z) const {
  if (!arch_.latent.enabled) return obs;
  nn::Tape& t = p.tape();
  int64_t n = t.value(obs).rows();
  if (static_cast<int64_t>(z.size()) != n)
    throw LayoutMismatch("latent codes: one code per observation required");
  nn::Tensor onehot(n, arch_.latent.count, 0.0);
  for (int64_t r = 0; r < n; ++r) {
    int code = z[static_cast<size_t>(r)];
    if (code < 0 || code >= arch_.latent.count)
      throw LayoutMismatch("latent code out of range");
    onehot(r, code) = 1.0;
  }
  nn::Var embed_rows = t.matmul(t.constant(std::move(onehot)), p["embed"]);
  return t.concat_cols(embed_rows, obs);
}

PolicyEval GaussianPolicy::build(nn::GraphParams& p, nn::Var obs,
                                 nn::Var hidden, std::span<const int> z,
                                 nn::Var* hidden_out) const {
  nn::Tape& t = p.tape();
  nn::Var x = input_graph_(p, obs, z);
  for (const auto& layer : trunk_) x = t.elu(layer.apply(p, x));
  if (hidden_size_ > 0) {
    nn::Var h = gru_.step(p, x, hidden);
    if (hidden_out) *hidden_out = h;
    x = h;
  } else if (hidden_out) {
    *hidden_out = hidden;
  }
  PolicyEval eval;
  eval.mean = head_.apply(p, x);
  eval.log_std_row = p["log_std"];
  return eval;
}

nn::Tensor GaussianPolicy::initial_hidden(int n) const {
  return nn::Tensor(n, hidden_size_, 0.0);
}

GaussianPolicy::ActOut GaussianPolicy::act(
    std::span<const std::vector<double>> obs, const nn::Tensor& hidden,
    std::span<const int> z, RngStream& rng) const {
  int64_t n = static_cast<int64_t>(obs.size());
  if (hidden.rows() != n || hidden.cols() != hidden_size_)
    throw LayoutMismatch("hidden state shape mismatch in act()");

  nn::Tape tape;
  nn::GraphParams p(tape, params_, /*trainable=*/false);
  nn::Var obs_v = tape.constant(normalize(obs));
  nn::Var hidden_v = tape.constant(hidden);
  nn::Var hidden_out;
  PolicyEval eval = build(p, obs_v, hidden_v, z, &hidden_out);

  ActOut out;
  out.mean = tape.value(eval.mean);
  out.hidden = tape.value(hidden_out);
  Eigen::Vector2d log_std = log_std_values();
  out.actions.resize(static_cast<size_t>(n));
  out.log_prob.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    Eigen::Vector2d mu(out.mean(i, 0), out.mean(i, 1));
    Eigen::Vector2d a;
    for (int d = 0; d < kActionDim; ++d)
      a[d] = mu[d] + std::exp(log_std[d]) * rng.normal();
    out.actions[static_cast<size_t>(i)] = {a[0], a[1]};
    out.log_prob[static_cast<size_t>(i)] =
        gaussian_log_prob_value(mu, log_std, a);
  }
  return out;
}

double GaussianPolicy::entropy() const {
  Eigen::Vector2d log_std = log_std_values();
  double h = 0;
  for (int d = 0; d < kActionDim; ++d)
    h += log_std[d] + 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  return h;
}

Eigen::Vector2d GaussianPolicy::log_std_values() const {
  const nn::Tensor& ls = params_.at("log_std");
  return {ls[0], ls[1]};
}

nn::Var gaussian_log_prob(nn::Tape& tape, nn::Var mean, nn::Var log_std_row,
                          nn::Var actions) {
  int64_t n = tape.value(mean).rows();
  nn::Var diff = tape.sub(actions, mean);
  nn::Var inv_var =
      tape.broadcast_row(tape.exp(tape.scale(log_std_row, -2.0)), n);
  nn::Var quad = tape.row_sum(tape.mul(tape.square(diff), inv_var));
  nn::Var log_std_sum = tape.broadcast_scalar(tape.sum(log_std_row), n, 1);
  return tape.shift(
      tape.sub(tape.scale(quad, -0.5), log_std_sum),
      -0.5 * kActionDim * kLog2Pi);
}

nn::Var gaussian_kl(nn::Tape& tape, const nn::Tensor& mean_old,
                    const Eigen::Vector2d& log_std_old, nn::Var mean_new,
                    nn::Var log_std_new_row) {
  int64_t n = mean_old.rows();
  nn::Tensor old_ls(1, kActionDim);
  nn::Tensor old_var(1, kActionDim);
  for (int d = 0; d < kActionDim; ++d) {
    old_ls[d] = log_std_old[d];
    old_var[d] = std::exp(2.0 * log_std_old[d]);
  }
  nn::Var log_ratio = tape.sub(log_std_new_row, tape.constant(old_ls));
  nn::Var inv_new_var = tape.exp(tape.scale(log_std_new_row, -2.0));
  nn::Var mean_sq = tape.square(tape.sub(tape.constant(mean_old), mean_new));
  nn::Var var_term = tape.mul(
      tape.add(tape.broadcast_row(tape.constant(old_var), n), mean_sq),
      tape.broadcast_row(inv_new_var, n));
  nn::Var per_dim = tape.shift(
      tape.add(tape.broadcast_row(log_ratio, n), tape.scale(var_term, 0.5)),
      -0.5);
  return tape.row_sum(per_dim);
}

double gaussian_log_prob_value(const Eigen::Vector2d& mean,
                               const Eigen::Vector2d& log_std,
                               const Eigen::Vector2d& action) {
  double lp = -0.5 * kActionDim * kLog2Pi;
  for (int d = 0; d < kActionDim; ++d) {
    double z = (action[d] - mean[d]) / std::exp(log_std[d]);
    lp += -0.5 * z * z - log_std[d];
  }
  return lp;
}

double gaussian_kl_value(const nn::Tensor& mean_old,
                         const Eigen::Vector2d& log_std_old,
                         const nn::Tensor& mean_new,
                         const Eigen::Vector2d& log_std_new) {
  double total = 0;
  for (int64_t i = 0; i < mean_old.rows(); ++i) {
    for (int d = 0; d < kActionDim; ++d) {
      double vo = std::exp(2.0 * log_std_old[d]);
      double vn = std::exp(2.0 * log_std_new[d]);
      double dm = mean_old(i, d) - mean_new(i, d);
      total += log_std_new[d] - log_std_old[d] + (vo + dm * dm) / (2.0 * vn) -
               0.5;
    }
  }
  return total / static_cast<double>(std::max<int64_t>(1, mean_old.rows()));
}

nn::Checkpoint policy_to_checkpoint(const GaussianPolicy& policy,
                                    const feat::ObservationLayout& layout,
                                    nlohmann::json extra_metadata) {
  nn::Checkpoint ckpt;
  ckpt.metadata = std::move(extra_metadata);
  ckpt.metadata["kind"] = "gaussian_policy";
  ckpt.metadata["architecture"] = policy.arch().to_json();
  ckpt.metadata["observation_layout"] = layout.to_json();
  ckpt.metadata["obs_dim"] = policy.obs_dim();
  for (const auto& [name, t] : policy.params().items())
    ckpt.tensors.emplace_back("policy/" + name, t);
  const auto& norm = policy.normalization();
  nn::Tensor mean(1, static_cast<int64_t>(norm.mean.size()));
  nn::Tensor std(1, static_cast<int64_t>(norm.std.size()));
  for (size_t i = 0; i < norm.mean.size(); ++i) {
    mean[static_cast<int64_t>(i)] = norm.mean[i];
    std[static_cast<int64_t>(i)] = norm.std[i];
  }
  ckpt.tensors.emplace_back("norm/mean", std::move(mean));
  ckpt.tensors.emplace_back("norm/std", std::move(std));
  return ckpt;
}

GaussianPolicy policy_from_checkpoint(
    const nn::Checkpoint& ckpt,
    const std::optional<feat::ObservationLayout>& expected) {
  if (ckpt.metadata.value("kind", "") != "gaussian_policy")
    throw VersionMismatch("checkpoint does not hold a policy");
  if (expected) {
    auto stored =
        feat::ObservationLayout::from_json(ckpt.metadata.at("observation_layout"));
    if (!(stored == *expected))
      throw VersionMismatch(
          "checkpoint observation layout does not match the configured "
          "features");
  }
  PolicyArch arch = PolicyArch::from_json(ckpt.metadata.at("architecture"));
  int obs_dim = ckpt.metadata.at("obs_dim").get<int>();
  GaussianPolicy policy(arch, obs_dim, /*init_seed=*/0);
  for (auto& [name, t] : policy.params().items()) {
    const nn::Tensor* stored = ckpt.find("policy/" + name);
    if (!stored || !stored->same_shape(t))
      throw VersionMismatch("checkpoint tensor missing or misshaped: " + name);
    t = *stored;
  }
  const nn::Tensor* mean = ckpt.find("norm/mean");
  const nn::Tensor* std = ckpt.find("norm/std");
  if (!mean || !std || mean->size() != obs_dim || std->size() != obs_dim)
    throw VersionMismatch("checkpoint normalization block missing");
  InputNormalization norm;
  norm.mean.assign(mean->data(), mean->data() + mean->size());
  norm.std.assign(std->data(), std->data() + std->size());
  policy.set_normalization(std::move(norm));
  return policy;
}

}  // namespace dm::policy
