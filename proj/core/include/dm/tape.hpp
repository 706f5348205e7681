#pragma once

#include <cstdint>
#include <vector>

#include "dm/tensor.hpp"

namespace dm::nn {

/// Handle to a node on a Tape. Only valid for the tape that created it.
struct Var {
  int32_t idx = -1;
  bool valid() const { return idx >= 0; }
};

/// Reverse-mode automatic differentiation over a dynamically built tape.
///
/// Values are evaluated eagerly as nodes are created. gradients() emits the
/// gradient computation as new nodes on the same tape, built from the same
/// primitive set, so gradients are themselves differentiable: calling
/// gradients() on an expression built from gradient nodes yields exact
/// second-order derivatives (used by the critic's gradient penalty).
class Tape {
 public:
  // ---- leaves ----
  Var constant(Tensor v) { return leaf_(std::move(v), false); }
  Var variable(Tensor v) { return leaf_(std::move(v), true); }

  // ---- primitives ----
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);   // elementwise
  Var div(Var a, Var b);   // elementwise
  Var scale(Var a, double c);
  Var shift(Var a, double c);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sqrt(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var elu(Var a);
  Var relu(Var a);
  Var sum(Var a);                                // -> 1x1
  Var row_sum(Var a);                            // Nxd -> Nx1
  Var col_sum(Var a);                            // Nxd -> 1xd
  Var broadcast_col(Var a, int64_t cols);        // Nx1 -> Nxcols
  Var broadcast_row(Var a, int64_t rows);        // 1xd -> rowsxd
  Var broadcast_scalar(Var a, int64_t rows, int64_t cols);  // 1x1 -> shape
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, int64_t begin, int64_t end);
  Var pad_cols(Var a, int64_t left, int64_t right);  // zero padding

  // ---- composites ----
  Var neg(Var a) { return scale(a, -1.0); }
  Var square(Var a) { return mul(a, a); }
  Var mean(Var a);
  Var add_rowvec(Var x, Var bias);      // x [Nxd] + bias [1xd]
  Var mul_rowvec(Var x, Var v);         // x [Nxd] * v [1xd] broadcast
  Var mul_colvec(Var x, Var v);         // x [Nxd] * v [Nx1] broadcast
  Var row_mean(Var a);
  Var dot(Var a, Var b) { return sum(mul(a, b)); }
  /// Numerically stable log(sum(exp(x))) per row: Nxd -> Nx1.
  Var log_sum_exp_rows(Var a);

  // ---- access ----
  const Tensor& value(Var v) const { return nodes_[check_(v)].value; }
  bool requires_grad(Var v) const { return nodes_[check_(v)].requires_grad; }
  size_t size() const { return nodes_.size(); }

  /// Gradient of `y` with respect to each entry of `wrt`, seeded with ones
  /// (or `seed` when given). Returned Vars are new nodes on this tape;
  /// entries of `wrt` unreachable from `y` get zero tensors. Every returned
  /// node participates in further differentiation.
  std::vector<Var> gradients(Var y, const std::vector<Var>& wrt);
  std::vector<Var> gradients(Var y, const std::vector<Var>& wrt,
                             const Tensor& seed);

  void clear() { nodes_.clear(); }

 private:
  enum class Op : uint8_t {
    Leaf, Add, Sub, Mul, Div, Scale, Shift, MatMul, Transpose, Exp, Log,
    Sqrt, Sigmoid, Tanh, Elu, Relu, Sum, RowSum, ColSum, BroadcastCol,
    BroadcastRow, BroadcastScalar, ConcatCols, SliceCols, PadCols,
  };

  struct Node {
    Op op = Op::Leaf;
    int32_t a = -1;
    int32_t b = -1;
    double c = 0.0;       // scalar for Scale/Shift
    int64_t i0 = 0;       // slice/pad/broadcast extents
    int64_t i1 = 0;
    Tensor value;
    bool requires_grad = false;
  };

  int32_t check_(Var v) const;
  Var leaf_(Tensor v, bool requires_grad);
  Var unary_(Op op, Var a, Tensor value, double c = 0.0, int64_t i0 = 0,
             int64_t i1 = 0);
  Var binary_(Op op, Var a, Var b, Tensor value);
  const Tensor& val_(int32_t i) const { return nodes_[static_cast<size_t>(i)].value; }
  void backprop_node_(int32_t i, std::vector<Var>& grad);
  void accumulate_(std::vector<Var>& grad, int32_t target, Var contribution);

  std::vector<Node> nodes_;
};

}  // namespace dm::nn
