#include <doctest.h>

#include <cmath>
#include <functional>

#include "dm/net.hpp"
#include "dm/rng.hpp"
#include "dm/tape.hpp"

using namespace dm;
using namespace dm::nn;

namespace {

Tensor random_tensor(int64_t r, int64_t c, RngStream& rng, double scale = 1.0) {
  Tensor t(r, c);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

// Central finite difference of a scalar function of one parameter store.
double fd(ParamStore& store, const std::string& name, int64_t k,
          const std::function<double()>& eval, double h = 1e-6) {
  Tensor& t = store.at(name);
  double orig = t[k];
  t[k] = orig + h;
  double up = eval();
  t[k] = orig - h;
  double dn = eval();
  t[k] = orig;
  return (up - dn) / (2 * h);
}

double max_rel_error(Tape& tape, ParamStore& store,
                     const std::vector<Var>& grads,
                     const std::function<double()>& eval, double h = 1e-6) {
  double worst = 0;
  size_t gi = 0;
  for (const auto& [name, t] : store.items()) {
    const Tensor& g = tape.value(grads[gi++]);
    for (int64_t k = 0; k < t.size(); ++k) {
      double numeric = fd(store, name, k, eval, h);
      double analytic = g[k];
      double rel = std::abs(numeric - analytic) /
                   std::max({1e-7, std::abs(numeric), std::abs(analytic)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("forward basics: identity, dense identity, elu value") {
  Tape tape;
  Tensor x = Tensor::row({1.0, -2.0, 3.0});
  Var xv = tape.constant(x);
  CHECK(tape.value(xv)[1] == -2.0);

  // dense with identity weights and zero bias reproduces the input
  ParamStore store;
  RngStream rng(0);
  Dense dense(store, rng, "d", 3, 3);
  Tensor& w = store.at("d/w");
  for (int64_t r = 0; r < 3; ++r)
    for (int64_t c = 0; c < 3; ++c) w(r, c) = r == c ? 1.0 : 0.0;
  GraphParams p(tape, store);
  Var out = dense.apply(p, xv);
  for (int64_t i = 0; i < 3; ++i) CHECK(tape.value(out)[i] == doctest::Approx(x[i]));

  Var e = tape.elu(tape.constant(Tensor::scalar(-1.0)));
  CHECK(tape.value(e)[0] == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("d(x^2)/dx = 2x") {
  Tape tape;
  Var x = tape.variable(Tensor::scalar(3.0));
  Var y = tape.square(x);
  Var g = tape.gradients(y, {x})[0];
  CHECK(tape.value(g)[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("dense + elu chain matches central differences") {
  RngStream rng(11);
  ParamStore store;
  Mlp mlp(store, rng, "m", 4, {8}, 4, Activation::Elu);
  Tensor x = random_tensor(4, 4, rng);

  auto eval = [&]() {
    Tape t;
    GraphParams p(t, store);
    return t.value(t.sum(t.square(mlp.apply(p, t.constant(x))))).scalar_value();
  };
  Tape tape;
  GraphParams p(tape, store);
  Var loss = tape.sum(tape.square(mlp.apply(p, tape.constant(x))));
  auto params = p.all();
  auto grads = tape.gradients(loss, params);
  CHECK(max_rel_error(tape, store, grads, eval) < 1e-5);
}

TEST_CASE("gru over 10 steps matches central differences") {
  RngStream rng(13);
  ParamStore store;
  GruCell gru(store, rng, "g", 3, 4);
  std::vector<Tensor> xs;
  for (int i = 0; i < 10; ++i) xs.push_back(random_tensor(2, 3, rng));

  auto eval = [&]() {
    Tape t;
    GraphParams p(t, store);
    Var h = t.constant(Tensor(2, 4));
    for (const auto& x : xs) h = gru.step(p, t.constant(x), h);
    return t.value(t.sum(t.square(h))).scalar_value();
  };
  Tape tape;
  GraphParams p(tape, store);
  Var h = tape.constant(Tensor(2, 4));
  for (const auto& x : xs) h = gru.step(p, tape.constant(x), h);
  Var loss = tape.sum(tape.square(h));
  auto params = p.all();
  auto grads = tape.gradients(loss, params);
  CHECK(max_rel_error(tape, store, grads, eval, 1e-5) < 1e-4);
}

TEST_CASE("input gradient of a linear critic is the weight row") {
  Tape tape;
  ParamStore store;
  RngStream rng(3);
  Dense dense(store, rng, "lin", 3, 1);
  GraphParams p(tape, store);
  Var x = tape.variable(Tensor::row({0.3, -0.7, 2.0}));
  Var y = dense.apply(p, x);
  Var gx = tape.gradients(y, {x})[0];
  const Tensor& w = store.at("lin/w");
  for (int64_t i = 0; i < 3; ++i)
    CHECK(tape.value(gx)[i] == doctest::Approx(w[i]).epsilon(1e-12));
}

TEST_CASE("unit-norm linear critic has zero gradient penalty") {
  Tape tape;
  ParamStore store;
  RngStream rng(4);
  Dense dense(store, rng, "lin", 3, 1);
  Tensor& w = store.at("lin/w");
  double norm = 0;
  for (int64_t i = 0; i < 3; ++i) norm += w[i] * w[i];
  for (int64_t i = 0; i < 3; ++i) w[i] /= std::sqrt(norm);

  GraphParams p(tape, store);
  Var x = tape.variable(Tensor::row({1.0, 2.0, 3.0}));
  Var y = dense.apply(p, x);
  Var gx = tape.gradients(y, {x})[0];
  Var pen = tape.square(
      tape.shift(tape.sqrt(tape.row_sum(tape.square(gx))), -1.0));
  CHECK(tape.value(pen).scalar_value() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("parameter gradient of the penalty matches finite differences") {
  // two-layer relu critic, exactly the double-backprop path the WGAN-GP uses
  RngStream rng(17);
  ParamStore store;
  Mlp critic(store, rng, "c", 5, {8, 8}, 1, Activation::Relu);
  Tensor x = random_tensor(6, 5, rng);

  auto eval = [&]() {
    Tape t;
    GraphParams p(t, store);
    Var xv = t.variable(x);
    Var score = critic.apply(p, xv);
    Var gx = t.gradients(t.sum(score), {xv})[0];
    Var norm = t.sqrt(t.row_sum(t.square(gx)));
    return t.value(t.mean(t.square(t.shift(norm, -1.0)))).scalar_value();
  };
  Tape tape;
  GraphParams p(tape, store);
  Var xv = tape.variable(x);
  Var score = critic.apply(p, xv);
  Var gx = tape.gradients(tape.sum(score), {xv})[0];
  Var norm = tape.sqrt(tape.row_sum(tape.square(gx)));
  Var pen = tape.mean(tape.square(tape.shift(norm, -1.0)));
  auto params = p.all();
  auto grads = tape.gradients(pen, params);
  CHECK(max_rel_error(tape, store, grads, eval, 1e-6) < 1e-4);
}

TEST_CASE("structural ops round-trip gradients") {
  RngStream rng(23);
  ParamStore store;
  store.add("a", random_tensor(3, 4, rng));
  store.add("b", random_tensor(3, 2, rng));

  auto eval = [&]() {
    Tape t;
    GraphParams p(t, store);
    Var joined = t.concat_cols(p["a"], p["b"]);
    Var sliced = t.slice_cols(joined, 1, 5);
    Var padded = t.pad_cols(sliced, 2, 1);
    Var lse = t.log_sum_exp_rows(padded);
    Var wide = t.broadcast_col(lse, 3);
    return t.value(t.sum(t.mul(wide, t.transpose(t.transpose(wide)))))
        .scalar_value();
  };
  Tape tape;
  GraphParams p(tape, store);
  Var joined = tape.concat_cols(p["a"], p["b"]);
  Var sliced = tape.slice_cols(joined, 1, 5);
  Var padded = tape.pad_cols(sliced, 2, 1);
  Var lse = tape.log_sum_exp_rows(padded);
  Var wide = tape.broadcast_col(lse, 3);
  Var loss = tape.sum(tape.mul(wide, tape.transpose(tape.transpose(wide))));
  auto params = p.all();
  auto grads = tape.gradients(loss, params);
  CHECK(max_rel_error(tape, store, grads, eval) < 1e-5);
}

TEST_CASE("all activation primitives pass gradient checks across seeds") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(seed);
    ParamStore store;
    store.add("x", random_tensor(3, 3, rng, 0.8));
    auto build = [&](Tape& t, GraphParams& p) {
      Var x = p["x"];
      Var mix = t.add(t.sigmoid(x), t.tanh(x));
      mix = t.add(mix, t.elu(x));
      mix = t.add(mix, t.relu(x));
      mix = t.add(mix, t.exp(t.scale(x, 0.3)));
      mix = t.add(mix, t.log(t.shift(t.square(x), 1.0)));
      mix = t.add(mix, t.sqrt(t.shift(t.square(x), 0.5)));
      mix = t.add(mix, t.div(x, t.shift(t.square(x), 2.0)));
      return t.sum(t.square(mix));
    };
    auto eval = [&]() {
      Tape t;
      GraphParams p(t, store);
      return t.value(build(t, p)).scalar_value();
    };
    Tape tape;
    GraphParams p(tape, store);
    Var loss = build(tape, p);
    auto params = p.all();
    auto grads = tape.gradients(loss, params);
    CHECK(max_rel_error(tape, store, grads, eval) < 1e-5);
  }
}

TEST_CASE("dropout: identity in eval, unbiased in train") {
  RngStream rng(31);
  Tensor x(200, 50, 1.0);

  Tape tape;
  Var xv = tape.constant(x);
  // eval mode is simply the absence of the dropout node
  Var kept = dropout(tape, xv, 0.0, rng);
  CHECK(kept.idx == xv.idx);

  double total = 0;
  const int reps = 40;
  for (int r = 0; r < reps; ++r) {
    Var d = dropout(tape, xv, 0.2, rng);
    total += tape.value(tape.mean(d)).scalar_value();
  }
  CHECK(std::abs(total / reps - 1.0) < 0.01);
}

TEST_CASE("tape evaluation is bitwise reproducible") {
  auto run = [](uint64_t seed) {
    RngStream rng(seed);
    ParamStore store;
    Mlp mlp(store, rng, "m", 6, {16, 16}, 2, Activation::Elu);
    Tensor x = random_tensor(8, 6, rng);
    Tape tape;
    GraphParams p(tape, store);
    Var out = mlp.apply_dropout(p, tape.constant(x), 0.2, rng);
    Var loss = tape.sum(tape.square(out));
    auto grads = tape.gradients(loss, p.all());
    std::vector<double> all;
    all.push_back(tape.value(loss).scalar_value());
    for (Var g : grads) {
      const Tensor& t = tape.value(g);
      all.insert(all.end(), t.values().begin(), t.values().end());
    }
    return all;
  };
  auto a = run(77);
  auto b = run(77);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("shape errors are reported") {
  Tape tape;
  Var a = tape.constant(Tensor(2, 3));
  Var b = tape.constant(Tensor(3, 2));
  CHECK_THROWS_AS(tape.add(a, b), ShapeMismatch);
  CHECK_THROWS_AS(tape.matmul(a, a), ShapeMismatch);
  CHECK_THROWS_AS(tape.slice_cols(a, 2, 2), ShapeMismatch);
}
