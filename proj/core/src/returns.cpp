#include <cmath>

#include "dm/error.hpp"
#include "dm/rollout.hpp"

namespace dm::trpo {

std::vector<std::pair<size_t, size_t>> RolloutBatch::episode_ranges() const {
  std::vector<std::pair<size_t, size_t>> out;
  size_t begin = 0;
  for (size_t i = 0; i < dones.size(); ++i) {
    if (dones[i]) {
      out.emplace_back(begin, i + 1);
      begin = i + 1;
    }
  }
  if (begin < dones.size()) out.emplace_back(begin, dones.size());
  return out;
}

std::vector<double> discounted_returns(std::span<const double> rewards,
                                       std::span<const uint8_t> dones,
                                       double gamma) {
  std::vector<double> returns(rewards.size(), 0.0);
  double acc = 0.0;
  for (size_t i = rewards.size(); i-- > 0;) {
    if (dones[i]) acc = 0.0;
    acc = rewards[i] + gamma * acc;
    returns[i] = acc;
  }
  return returns;
}

std::vector<double> gae_advantages(std::span<const double> rewards,
                                   std::span<const uint8_t> dones,
                                   std::span<const double> values,
                                   double gamma, double lambda,
                                   bool normalize) {
  if (values.size() != rewards.size() || dones.size() != rewards.size())
    throw ShapeMismatch("gae_advantages: input length mismatch");
  std::vector<double> adv(rewards.size(), 0.0);
  double acc = 0.0;
  for (size_t i = rewards.size(); i-- > 0;) {
    bool done = dones[i] != 0;
    double next_value = (!done && i + 1 < values.size()) ? values[i + 1] : 0.0;
    double delta = rewards[i] + gamma * next_value * (done ? 0.0 : 1.0) -
                   values[i];
    acc = done ? delta : delta + gamma * lambda * acc;
    adv[i] = acc;
  }
  if (normalize && !adv.empty()) {
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(adv.size());
    double inv_std = 1.0 / std::sqrt(var + 1e-12);
    for (double& a : adv) a = (a - mean) * inv_std;
  }
  return adv;
}

}  // namespace dm::trpo
