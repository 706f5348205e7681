#include "dm/adam.hpp"

#include <cmath>
#include <sstream>

#include "dm/error.hpp"

namespace dm::nn {

Adam::Adam(AdamConfig cfg, int64_t size)
    : cfg_(cfg),
      m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ShapeMismatch("adam: parameter/gradient size mismatch");
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grads;
  v_ = cfg_.beta2 * v_.array().matrix() +
       (1.0 - cfg_.beta2) * grads.array().square().matrix();
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  params.array() -=
      cfg_.learning_rate * (m_.array() / bc1) /
      ((v_.array() / bc2).sqrt() + cfg_.epsilon);
}

std::string Adam::serialize() const {
  std::ostringstream os;
  os.precision(17);
  os << t_ << " " << m_.size();
  for (int64_t i = 0; i < m_.size(); ++i) os << " " << m_[i];
  for (int64_t i = 0; i < v_.size(); ++i) os << " " << v_[i];
  return os.str();
}

void Adam::deserialize(const std::string& text) {
  std::istringstream is(text);
  int64_t n = 0;
  is >> t_ >> n;
  m_.resize(n);
  v_.resize(n);
  for (int64_t i = 0; i < n; ++i) is >> m_[i];
  for (int64_t i = 0; i < n; ++i) is >> v_[i];
  if (is.fail()) throw CorruptCheckpoint("bad adam state");
}

}  // namespace dm::nn
