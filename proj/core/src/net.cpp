#include "dm/net.hpp"

#include <cmath>

#include "dm/error.hpp"

namespace dm::nn {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) throw ShapeMismatch("duplicate parameter " + name);
  index_[name] = items_.size();
  items_.emplace_back(name, std::move(init));
  return items_.back().second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeMismatch("unknown parameter " + name);
  return items_[it->second].second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeMismatch("unknown parameter " + name);
  return items_[it->second].second;
}

bool ParamStore::has(const std::string& name) const {
  return index_.count(name) > 0;
}

int64_t ParamStore::total_size() const {
  int64_t n = 0;
  for (const auto& [name, t] : items_) n += t.size();
  return n;
}

Eigen::VectorXd ParamStore::flatten() const {
  Eigen::VectorXd flat(total_size());
  int64_t at = 0;
  for (const auto& [name, t] : items_) {
    for (int64_t i = 0; i < t.size(); ++i) flat[at++] = t[i];
  }
  return flat;
}

void ParamStore::set_from_flat(const Eigen::VectorXd& flat) {
  if (flat.size() != total_size())
    throw ShapeMismatch("set_from_flat: size mismatch");
  int64_t at = 0;
  for (auto& [name, t] : items_) {
    for (int64_t i = 0; i < t.size(); ++i) t[i] = flat[at++];
  }
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.items_.size() != items_.size())
    throw ShapeMismatch("copy_values_from: store layout mismatch");
  for (size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].first != other.items_[i].first ||
        !items_[i].second.same_shape(other.items_[i].second))
      throw ShapeMismatch("copy_values_from: store layout mismatch");
    items_[i].second = other.items_[i].second;
  }
}

Var GraphParams::operator[](const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var v = trainable_ ? tape_->variable(store_->at(name))
                     : tape_->constant(store_->at(name));
  bound_[name] = v;
  return v;
}

std::vector<Var> GraphParams::all() {
  std::vector<Var> out;
  out.reserve(store_->items().size());
  for (const auto& [name, t] : store_->items()) out.push_back((*this)[name]);
  return out;
}

Tensor init_zeros(int64_t rows, int64_t cols) { return Tensor(rows, cols); }

Tensor init_uniform_fanin(RngStream& rng, int64_t in, int64_t out) {
  double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor t(in, out);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

Tensor init_orthogonal(RngStream& rng, int64_t rows, int64_t cols) {
  int64_t n = std::max(rows, cols);
  EigenMatrix gauss(n, n);
  for (int64_t r = 0; r < n; ++r)
    for (int64_t c = 0; c < n; ++c) gauss(r, c) = rng.normal();
  Eigen::HouseholderQR<EigenMatrix> qr(gauss);
  EigenMatrix q = qr.householderQ();
  // Fix the sign convention so the decomposition is unique.
  EigenMatrix rmat = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int64_t c = 0; c < n; ++c)
    if (rmat(c, c) < 0) q.col(c) *= -1.0;
  Tensor t(rows, cols);
  t.mat() = q.topLeftCorner(rows, cols);
  return t;
}

Var apply_activation(Tape& tape, Var x, Activation act) {
  switch (act) {
    case Activation::None: return x;
    case Activation::Relu: return tape.relu(x);
    case Activation::Elu: return tape.elu(x);
    case Activation::Tanh: return tape.tanh(x);
  }
  return x;
}

Dense::Dense(ParamStore& store, RngStream& rng, std::string prefix, int64_t in,
             int64_t out)
    : prefix_(std::move(prefix)), in_(in), out_(out) {
  store.add(prefix_ + "/w", init_uniform_fanin(rng, in, out));
  store.add(prefix_ + "/b", init_zeros(1, out));
}

Var Dense::apply(GraphParams& p, Var x) const {
  Tape& t = p.tape();
  return t.add_rowvec(t.matmul(x, p[prefix_ + "/w"]), p[prefix_ + "/b"]);
}

Mlp::Mlp(ParamStore& store, RngStream& rng, std::string prefix, int64_t in,
         const std::vector<int64_t>& hidden, int64_t out, Activation act)
    : act_(act), in_(in), out_(out) {
  int64_t prev = in;
  for (size_t i = 0; i < hidden.size(); ++i) {
    layers_.emplace_back(store, rng, prefix + "/h" + std::to_string(i), prev,
                         hidden[i]);
    prev = hidden[i];
  }
  layers_.emplace_back(store, rng, prefix + "/out", prev, out);
}

Var Mlp::forward_(GraphParams& p, Var x, double drop_prob,
                  RngStream* rng) const {
  Tape& t = p.tape();
  Var h = x;
  for (size_t i = 0; i + 1 < layers_.size(); ++i) {
    h = apply_activation(t, layers_[i].apply(p, h), act_);
    if (rng && drop_prob > 0.0) h = dropout(t, h, drop_prob, *rng);
  }
  return layers_.back().apply(p, h);
}

Var Mlp::apply(GraphParams& p, Var x) const { return forward_(p, x, 0.0, nullptr); }

Var Mlp::apply_dropout(GraphParams& p, Var x, double drop_prob,
                       RngStream& rng) const {
  return forward_(p, x, drop_prob, &rng);
}

GruCell::GruCell(ParamStore& store, RngStream& rng, std::string prefix,
                 int64_t in, int64_t hidden)
    : prefix_(std::move(prefix)), in_(in), hidden_(hidden) {
  for (const char* gate : {"z", "r", "c"}) {
    store.add(prefix_ + "/wx" + gate, init_uniform_fanin(rng, in, hidden));
    store.add(prefix_ + "/wh" + gate, init_orthogonal(rng, hidden, hidden));
    store.add(prefix_ + "/b" + gate, init_zeros(1, hidden));
  }
}

Var GruCell::step(GraphParams& p, Var x, Var h) const {
  Tape& t = p.tape();
  auto gate = [&](const char* g, Var hin) {
    return t.add_rowvec(t.add(t.matmul(x, p[prefix_ + "/wx" + g]),
                              t.matmul(hin, p[prefix_ + "/wh" + g])),
                        p[prefix_ + "/b" + g]);
  };
  Var z = t.sigmoid(gate("z", h));
  Var r = t.sigmoid(gate("r", h));
  Var cand = t.tanh(t.add_rowvec(
      t.add(t.matmul(x, p[prefix_ + "/wxc"]),
            t.matmul(t.mul(r, h), p[prefix_ + "/whc"])),
      p[prefix_ + "/bc"]));
  // h' = (1 - z) * h + z * c
  return t.add(t.mul(t.shift(t.neg(z), 1.0), h), t.mul(z, cand));
}

Var dropout(Tape& tape, Var x, double drop_prob, RngStream& rng) {
  if (drop_prob <= 0.0) return x;
  if (drop_prob >= 1.0) throw ShapeMismatch("dropout: drop_prob must be < 1");
  const Tensor& tx = tape.value(x);
  double keep = 1.0 - drop_prob;
  Tensor mask(tx.rows(), tx.cols());
  for (int64_t i = 0; i < mask.size(); ++i)
    mask[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return tape.mul(x, tape.constant(std::move(mask)));
}

}  // namespace dm::nn
