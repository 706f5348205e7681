#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dm/rng.hpp"
#include "dm/tape.hpp"
#include "dm/tensor.hpp"

namespace dm::nn {

/// Named parameter tensors with a stable registration order. The order
/// defines the flattened layout used by optimizers and conjugate-gradient
/// solves.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const;

  const std::vector<std::pair<std::string, Tensor>>& items() const {
    return items_;
  }
  std::vector<std::pair<std::string, Tensor>>& items() { return items_; }

  int64_t total_size() const;
  Eigen::VectorXd flatten() const;
  void set_from_flat(const Eigen::VectorXd& flat);
  void copy_values_from(const ParamStore& other);

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::map<std::string, size_t> index_;
};

/// Binds a ParamStore's tensors into a tape as leaves (one leaf per
/// parameter, created lazily and cached for the lifetime of this object).
class GraphParams {
 public:
  GraphParams(Tape& tape, const ParamStore& store, bool trainable = true)
      : tape_(&tape), store_(&store), trainable_(trainable) {}

  Var operator[](const std::string& name);
  /// All parameter leaves in registration order (forces binding).
  std::vector<Var> all();
  Tape& tape() { return *tape_; }

 private:
  Tape* tape_;
  const ParamStore* store_;
  bool trainable_;
  std::map<std::string, Var> bound_;
};

// Weight initializers.
Tensor init_zeros(int64_t rows, int64_t cols);
Tensor init_uniform_fanin(RngStream& rng, int64_t in, int64_t out);
Tensor init_orthogonal(RngStream& rng, int64_t rows, int64_t cols);

enum class Activation { None, Relu, Elu, Tanh };

Var apply_activation(Tape& tape, Var x, Activation act);

/// Fully connected layer; registers `<prefix>/w` and `<prefix>/b`.
class Dense {
 public:
  Dense() = default;
  Dense(ParamStore& store, RngStream& rng, std::string prefix, int64_t in,
        int64_t out);
  Var apply(GraphParams& p, Var x) const;

  int64_t in_size() const { return in_; }
  int64_t out_size() const { return out_; }

 private:
  std::string prefix_;
  int64_t in_ = 0;
  int64_t out_ = 0;
};

/// Multilayer perceptron: hidden dense layers with one activation, then a
/// linear output layer. Optional inverted dropout after each hidden
/// activation (train-time only; eval is the identity).
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& store, RngStream& rng, std::string prefix, int64_t in,
      const std::vector<int64_t>& hidden, int64_t out, Activation act);

  Var apply(GraphParams& p, Var x) const;
  Var apply_dropout(GraphParams& p, Var x, double drop_prob,
                    RngStream& rng) const;

  int64_t in_size() const { return in_; }
  int64_t out_size() const { return out_; }

 private:
  Var forward_(GraphParams& p, Var x, double drop_prob, RngStream* rng) const;
  std::vector<Dense> layers_;
  Activation act_ = Activation::Elu;
  int64_t in_ = 0;
  int64_t out_ = 0;
};

/// Gated recurrent unit cell (update/reset gates, tanh candidate).
/// Input weights use fan-in init, recurrent weights orthogonal init.
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParamStore& store, RngStream& rng, std::string prefix, int64_t in,
          int64_t hidden);

  /// One step: x [N x in], h [N x hidden] -> new hidden [N x hidden].
  Var step(GraphParams& p, Var x, Var h) const;

  int64_t input_size() const { return in_; }
  int64_t hidden_size() const { return hidden_; }

 private:
  std::string prefix_;
  int64_t in_ = 0;
  int64_t hidden_ = 0;
};

/// Inverted dropout mask as a constant graph leaf; scale 1/keep on kept
/// entries so the expected output equals the input.
Var dropout(Tape& tape, Var x, double drop_prob, RngStream& rng);

}  // namespace dm::nn
