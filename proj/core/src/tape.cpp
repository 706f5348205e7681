#include "dm/tape.hpp"

#include <algorithm>
#include <cmath>

namespace dm::nn {

int32_t Tape::check_(Var v) const {
  if (!v.valid() || static_cast<size_t>(v.idx) >= nodes_.size())
    throw NoForwardPass("Var does not belong to this tape");
  return v.idx;
}

Var Tape::leaf_(Tensor v, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(v);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Var Tape::unary_(Op op, Var a, Tensor value, double c, int64_t i0, int64_t i1) {
  int32_t ia = check_(a);
  Node n;
  n.op = op;
  n.a = ia;
  n.c = c;
  n.i0 = i0;
  n.i1 = i1;
  n.value = std::move(value);
  n.requires_grad = nodes_[static_cast<size_t>(ia)].requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Var Tape::binary_(Op op, Var a, Var b, Tensor value) {
  int32_t ia = check_(a), ib = check_(b);
  Node n;
  n.op = op;
  n.a = ia;
  n.b = ib;
  n.value = std::move(value);
  n.requires_grad = nodes_[static_cast<size_t>(ia)].requires_grad ||
                    nodes_[static_cast<size_t>(ib)].requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) throw ShapeMismatch(std::string(op) + ": shape mismatch");
}
}  // namespace

Var Tape::add(Var a, Var b) {
  const Tensor &ta = val_(check_(a)), &tb = val_(check_(b));
  require_same_shape(ta, tb, "add");
  Tensor out(ta.rows(), ta.cols());
  out.mat() = ta.mat() + tb.mat();
  return binary_(Op::Add, a, b, std::move(out));
}

Var Tape::sub(Var a, Var b) {
  const Tensor &ta = val_(check_(a)), &tb = val_(check_(b));
  require_same_shape(ta, tb, "sub");
  Tensor out(ta.rows(), ta.cols());
  out.mat() = ta.mat() - tb.mat();
  return binary_(Op::Sub, a, b, std::move(out));
}

Var Tape::mul(Var a, Var b) {
  const Tensor &ta = val_(check_(a)), &tb = val_(check_(b));
  require_same_shape(ta, tb, "mul");
  Tensor out(ta.rows(), ta.cols());
  out.mat() = ta.mat().cwiseProduct(tb.mat());
  return binary_(Op::Mul, a, b, std::move(out));
}

Var Tape::div(Var a, Var b) {
  const Tensor &ta = val_(check_(a)), &tb = val_(check_(b));
  require_same_shape(ta, tb, "div");
  Tensor out(ta.rows(), ta.cols());
  out.mat() = ta.mat().cwiseQuotient(tb.mat());
  return binary_(Op::Div, a, b, std::move(out));
}

Var Tape::scale(Var a, double c) {
  const Tensor& ta = val_(check_(a));
  Tensor out(ta.rows(), ta.cols());
  out.mat() = ta.mat() * c;
  return unary_(Op::Scale, a, std::move(out), c);
}

Var Tape::shift(Var a, double c) {
  const Tensor& ta = val_(check_(a));
  Tensor out(ta.rows(), ta.cols());
  out.mat() = ta.mat().array() + c;
  return unary_(Op::Shift, a, std::move(out), c);
}

Var Tape::matmul(Var a, Var b) {
  const Tensor &ta = val_(check_(a)), &tb = val_(check_(b));
  if (ta.cols() != tb.rows()) throw ShapeMismatch("matmul: inner dimensions");
  Tensor out(ta.rows(), tb.cols());
  out.mat().noalias() = ta.mat() * tb.mat();
  return binary_(Op::MatMul, a, b, std::move(out));
}

Var Tape::transpose(Var a) {
  const Tensor& ta = val_(check_(a));
  Tensor out(ta.cols(), ta.rows());
  out.mat() = ta.mat().transpose();
  return unary_(Op::Transpose, a, std::move(out));
}

Var Tape::exp(Var a) {
  const Tensor& ta = val_(check_(a));
  Tensor out(ta.rows(), ta.cols());
  out.mat() = ta.mat().array().exp();
  return unary_(Op::Exp, a, std::move(out));
}

Var Tape::log(Var a) {
  const Tensor& ta = val_(check_(a));
  Tensor out(ta.rows(), ta.cols());
  out.mat() = ta.mat().array().log();
  return unary_(Op::Log, a, std::move(out));
}

Var Tape::sqrt(Var a) {
  const Tensor& ta = val_(check_(a));
  Tensor out(ta.rows(), ta.cols());
  out.mat() = ta.mat().array().sqrt();
  return unary_(Op::Sqrt, a, std::move(out));
}

Var Tape::sigmoid(Var a) {
  const Tensor& ta = val_(check_(a));
  Tensor out(ta.rows(), ta.cols());
  for (int64_t i = 0; i < ta.size(); ++i) {
    double x = ta[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
  }
  return unary_(Op::Sigmoid, a, std::move(out));
}

Var Tape::tanh(Var a) {
  const Tensor& ta = val_(check_(a));
  Tensor out(ta.rows(), ta.cols());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = std::tanh(ta[i]);
  return unary_(Op::Tanh, a, std::move(out));
}

Var Tape::elu(Var a) {
  const Tensor& ta = val_(check_(a));
  Tensor out(ta.rows(), ta.cols());
  for (int64_t i = 0; i < ta.size(); ++i) {
    double x = ta[i];
    out[i] = x > 0.0 ? x : std::expm1(x);
  }
  return unary_(Op::Elu, a, std::move(out));
}

Var Tape::relu(Var a) {
  const Tensor& ta = val_(check_(a));
  Tensor out(ta.rows(), ta.cols());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = std::max(0.0, ta[i]);
  return unary_(Op::Relu, a, std::move(out));
}

Var Tape::sum(Var a) {
  const Tensor& ta = val_(check_(a));
  return unary_(Op::Sum, a, Tensor::scalar(ta.mat().sum()), 0.0, ta.rows(),
                ta.cols());
}

Var Tape::row_sum(Var a) {
  const Tensor& ta = val_(check_(a));
  Tensor out(ta.rows(), 1);
  out.mat().col(0) = ta.mat().rowwise().sum();
  return unary_(Op::RowSum, a, std::move(out), 0.0, ta.rows(), ta.cols());
}

Var Tape::col_sum(Var a) {
  const Tensor& ta = val_(check_(a));
  Tensor out(1, ta.cols());
  out.mat().row(0) = ta.mat().colwise().sum();
  return unary_(Op::ColSum, a, std::move(out), 0.0, ta.rows(), ta.cols());
}

Var Tape::broadcast_col(Var a, int64_t cols) {
  const Tensor& ta = val_(check_(a));
  if (ta.cols() != 1) throw ShapeMismatch("broadcast_col: input must be Nx1");
  Tensor out(ta.rows(), cols);
  out.mat() = ta.mat().col(0).replicate(1, cols);
  return unary_(Op::BroadcastCol, a, std::move(out), 0.0, cols);
}

Var Tape::broadcast_row(Var a, int64_t rows) {
  const Tensor& ta = val_(check_(a));
  if (ta.rows() != 1) throw ShapeMismatch("broadcast_row: input must be 1xd");
  Tensor out(rows, ta.cols());
  out.mat() = ta.mat().row(0).replicate(rows, 1);
  return unary_(Op::BroadcastRow, a, std::move(out), 0.0, rows);
}

Var Tape::broadcast_scalar(Var a, int64_t rows, int64_t cols) {
  const Tensor& ta = val_(check_(a));
  if (ta.size() != 1) throw ShapeMismatch("broadcast_scalar: input must be 1x1");
  Tensor out(rows, cols, ta[0]);
  return unary_(Op::BroadcastScalar, a, std::move(out), 0.0, rows, cols);
}

Var Tape::concat_cols(Var a, Var b) {
  const Tensor &ta = val_(check_(a)), &tb = val_(check_(b));
  if (ta.rows() != tb.rows()) throw ShapeMismatch("concat_cols: row mismatch");
  Tensor out(ta.rows(), ta.cols() + tb.cols());
  out.mat().leftCols(ta.cols()) = ta.mat();
  out.mat().rightCols(tb.cols()) = tb.mat();
  return binary_(Op::ConcatCols, a, b, std::move(out));
}

Var Tape::slice_cols(Var a, int64_t begin, int64_t end) {
  const Tensor& ta = val_(check_(a));
  if (begin < 0 || end > ta.cols() || begin >= end)
    throw ShapeMismatch("slice_cols: bad range");
  Tensor out(ta.rows(), end - begin);
  out.mat() = ta.mat().middleCols(begin, end - begin);
  return unary_(Op::SliceCols, a, std::move(out), 0.0, begin, end);
}

Var Tape::pad_cols(Var a, int64_t left, int64_t right) {
  const Tensor& ta = val_(check_(a));
  if (left < 0 || right < 0) throw ShapeMismatch("pad_cols: negative pad");
  Tensor out(ta.rows(), left + ta.cols() + right, 0.0);
  out.mat().middleCols(left, ta.cols()) = ta.mat();
  return unary_(Op::PadCols, a, std::move(out), 0.0, left, right);
}

Var Tape::mean(Var a) {
  const Tensor& ta = val_(check_(a));
  return scale(sum(a), 1.0 / static_cast<double>(ta.size()));
}

Var Tape::row_mean(Var a) {
  const Tensor& ta = val_(check_(a));
  return scale(row_sum(a), 1.0 / static_cast<double>(ta.cols()));
}

Var Tape::add_rowvec(Var x, Var bias) {
  const Tensor& tx = val_(check_(x));
  return add(x, broadcast_row(bias, tx.rows()));
}

Var Tape::mul_rowvec(Var x, Var v) {
  const Tensor& tx = val_(check_(x));
  return mul(x, broadcast_row(v, tx.rows()));
}

Var Tape::mul_colvec(Var x, Var v) {
  const Tensor& tx = val_(check_(x));
  return mul(x, broadcast_col(v, tx.cols()));
}

Var Tape::log_sum_exp_rows(Var a) {
  const Tensor& ta = val_(check_(a));
  // Row max enters as a constant: logsumexp(x) = m + log(sum(exp(x - m)))
  // holds for any constant m, so the gradient stays exact.
  Tensor m(ta.rows(), 1);
  m.mat().col(0) = ta.mat().rowwise().maxCoeff();
  Var mv = constant(m);
  Var centered = sub(a, broadcast_col(mv, ta.cols()));
  return add(mv, log(row_sum(exp(centered))));
}

void Tape::accumulate_(std::vector<Var>& grad, int32_t target, Var c) {
  size_t t = static_cast<size_t>(target);
  grad[t] = grad[t].valid() ? add(grad[t], c) : c;
}

void Tape::backprop_node_(int32_t i, std::vector<Var>& grad) {
  // Copy the POD fields (not the node reference): emitting gradient nodes
  // below may reallocate nodes_.
  const Node& n0 = nodes_[static_cast<size_t>(i)];
  const Op op = n0.op;
  const int32_t ia = n0.a, ib = n0.b;
  const double c = n0.c;
  const int64_t i0 = n0.i0, i1 = n0.i1;
  Var g = grad[static_cast<size_t>(i)];
  Var out{i};
  Var a{ia}, b{ib};

  const bool need_a =
      ia >= 0 && nodes_[static_cast<size_t>(ia)].requires_grad;
  const bool need_b =
      ib >= 0 && nodes_[static_cast<size_t>(ib)].requires_grad;
  if (!need_a && !need_b) return;

  switch (op) {
    case Op::Leaf:
      break;
    case Op::Add:
      if (need_a) accumulate_(grad, ia, g);
      if (need_b) accumulate_(grad, ib, g);
      break;
    case Op::Sub:
      if (need_a) accumulate_(grad, ia, g);
      if (need_b) accumulate_(grad, ib, neg(g));
      break;
    case Op::Mul:
      if (need_a) accumulate_(grad, ia, mul(g, b));
      if (need_b) accumulate_(grad, ib, mul(g, a));
      break;
    case Op::Div:
      if (need_a) accumulate_(grad, ia, div(g, b));
      if (need_b) accumulate_(grad, ib, neg(div(mul(g, out), b)));
      break;
    case Op::Scale:
      if (need_a) accumulate_(grad, ia, scale(g, c));
      break;
    case Op::Shift:
      if (need_a) accumulate_(grad, ia, g);
      break;
    case Op::MatMul:
      if (need_a) accumulate_(grad, ia, matmul(g, transpose(b)));
      if (need_b) accumulate_(grad, ib, matmul(transpose(a), g));
      break;
    case Op::Transpose:
      if (need_a) accumulate_(grad, ia, transpose(g));
      break;
    case Op::Exp:
      if (need_a) accumulate_(grad, ia, mul(g, out));
      break;
    case Op::Log:
      if (need_a) accumulate_(grad, ia, div(g, a));
      break;
    case Op::Sqrt:
      if (need_a) accumulate_(grad, ia, scale(div(g, out), 0.5));
      break;
    case Op::Sigmoid:
      if (need_a)
        accumulate_(grad, ia, mul(g, mul(out, shift(neg(out), 1.0))));
      break;
    case Op::Tanh:
      if (need_a) accumulate_(grad, ia, mul(g, shift(neg(square(out)), 1.0)));
      break;
    case Op::Elu: {
      if (need_a) {
        const Tensor& x = val_(ia);
        Tensor mask(x.rows(), x.cols()), inv(x.rows(), x.cols());
        for (int64_t k = 0; k < x.size(); ++k) {
          mask[k] = x[k] > 0.0 ? 1.0 : 0.0;
          inv[k] = 1.0 - mask[k];
        }
        // d/dx elu = 1 for x > 0, exp(x) = elu(x) + 1 otherwise
        Var deriv = add(constant(std::move(mask)),
                        mul(constant(std::move(inv)), shift(out, 1.0)));
        accumulate_(grad, ia, mul(g, deriv));
      }
      break;
    }
    case Op::Relu: {
      if (need_a) {
        const Tensor& x = val_(ia);
        Tensor mask(x.rows(), x.cols());
        for (int64_t k = 0; k < x.size(); ++k) mask[k] = x[k] > 0.0 ? 1.0 : 0.0;
        accumulate_(grad, ia, mul(g, constant(std::move(mask))));
      }
      break;
    }
    case Op::Sum:
      if (need_a) accumulate_(grad, ia, broadcast_scalar(g, i0, i1));
      break;
    case Op::RowSum:
      if (need_a) accumulate_(grad, ia, broadcast_col(g, i1));
      break;
    case Op::ColSum:
      if (need_a) accumulate_(grad, ia, broadcast_row(g, i0));
      break;
    case Op::BroadcastCol:
      if (need_a) accumulate_(grad, ia, row_sum(g));
      break;
    case Op::BroadcastRow:
      if (need_a) accumulate_(grad, ia, col_sum(g));
      break;
    case Op::BroadcastScalar:
      if (need_a) accumulate_(grad, ia, sum(g));
      break;
    case Op::ConcatCols: {
      int64_t ca = val_(ia).cols();
      int64_t cb = val_(ib).cols();
      if (need_a) accumulate_(grad, ia, slice_cols(g, 0, ca));
      if (need_b) accumulate_(grad, ib, slice_cols(g, ca, ca + cb));
      break;
    }
    case Op::SliceCols: {
      if (need_a) {
        int64_t total = val_(ia).cols();
        accumulate_(grad, ia, pad_cols(g, i0, total - i1));
      }
      break;
    }
    case Op::PadCols: {
      if (need_a) {
        int64_t ca = val_(ia).cols();
        accumulate_(grad, ia, slice_cols(g, i0, i0 + ca));
      }
      break;
    }
  }
}

std::vector<Var> Tape::gradients(Var y, const std::vector<Var>& wrt) {
  const Tensor& ty = value(y);
  return gradients(y, wrt, Tensor(ty.rows(), ty.cols(), 1.0));
}

std::vector<Var> Tape::gradients(Var y, const std::vector<Var>& wrt,
                                 const Tensor& seed) {
  int32_t iy = check_(y);
  if (!seed.same_shape(value(y)))
    throw ShapeMismatch("gradients: seed shape does not match output");

  std::vector<Var> grad(static_cast<size_t>(iy) + 1);
  grad[static_cast<size_t>(iy)] = constant(seed);

  if (nodes_[static_cast<size_t>(iy)].requires_grad) {
    for (int32_t i = iy; i >= 0; --i) {
      if (!grad[static_cast<size_t>(i)].valid()) continue;
      if (nodes_[static_cast<size_t>(i)].op == Op::Leaf) continue;
      backprop_node_(i, grad);
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (Var w : wrt) {
    int32_t iw = check_(w);
    if (iw <= iy && grad[static_cast<size_t>(iw)].valid()) {
      out.push_back(grad[static_cast<size_t>(iw)]);
    } else {
      const Tensor& tw = value(w);
      out.push_back(constant(Tensor(tw.rows(), tw.cols(), 0.0)));
    }
  }
  return out;
}

}  // namespace dm::nn
