#include <doctest.h>

#include <cmath>

#include "dm/adam.hpp"
#include "dm/net.hpp"

using namespace dm;
using namespace dm::nn;

TEST_CASE("orthogonal init produces orthonormal columns") {
  RngStream rng(2);
  Tensor q = init_orthogonal(rng, 16, 16);
  EigenMatrix m = q.mat();
  EigenMatrix gram = m.transpose() * m;
  for (int64_t r = 0; r < 16; ++r)
    for (int64_t c = 0; c < 16; ++c)
      CHECK(gram(r, c) == doctest::Approx(r == c ? 1.0 : 0.0).epsilon(1e-9));
}

TEST_CASE("param store flatten round-trips") {
  RngStream rng(3);
  ParamStore store;
  store.add("w", init_uniform_fanin(rng, 4, 5));
  store.add("b", init_zeros(1, 5));
  Eigen::VectorXd flat = store.flatten();
  CHECK(flat.size() == 25);
  flat[7] = 42.0;
  store.set_from_flat(flat);
  Eigen::VectorXd back = store.flatten();
  for (int64_t i = 0; i < 25; ++i) CHECK(back[i] == flat[i]);
  CHECK_THROWS_AS(store.set_from_flat(Eigen::VectorXd::Zero(3)), ShapeMismatch);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Adam adam(AdamConfig{}, 4);
  Eigen::VectorXd params = Eigen::VectorXd::Constant(4, 1.5);
  Eigen::VectorXd before = params;
  adam.step(params, Eigen::VectorXd::Zero(4));
  for (int i = 0; i < 4; ++i) CHECK(params[i] == before[i]);
}

TEST_CASE("adam: first step with constant gradient is a signed lr step") {
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  Adam adam(cfg, 3);
  Eigen::VectorXd params = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd grads(3);
  grads << 2.0, -0.5, 1e-3;
  adam.step(params, grads);
  // bias-corrected first step: delta = -lr * g / (|g| + eps)
  for (int i = 0; i < 3; ++i) {
    double expected = -cfg.learning_rate * grads[i] /
                      (std::abs(grads[i]) + cfg.epsilon);
    CHECK(params[i] == doctest::Approx(expected).epsilon(1e-9));
    CHECK(std::abs(params[i]) <= cfg.learning_rate * (1 + 1e-6));
  }
}

TEST_CASE("adam runs are bitwise deterministic") {
  auto run = []() {
    RngStream rng(9);
    Adam adam(AdamConfig{}, 8);
    Eigen::VectorXd params = Eigen::VectorXd::Zero(8);
    for (int step = 0; step < 50; ++step) {
      Eigen::VectorXd g(8);
      for (int i = 0; i < 8; ++i) g[i] = rng.normal();
      adam.step(params, g);
    }
    return params;
  };
  Eigen::VectorXd a = run(), b = run();
  for (int i = 0; i < 8; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("adam state serialization round-trips") {
  Adam a(AdamConfig{}, 5);
  Eigen::VectorXd params = Eigen::VectorXd::Zero(5);
  Eigen::VectorXd g = Eigen::VectorXd::Constant(5, 0.3);
  a.step(params, g);
  a.step(params, g);
  Adam b(AdamConfig{}, 5);
  b.deserialize(a.serialize());
  Eigen::VectorXd pa = params, pb = params;
  a.step(pa, g);
  b.step(pb, g);
  for (int i = 0; i < 5; ++i) CHECK(pa[i] == pb[i]);
}

TEST_CASE("mlp wiring produces the declared shapes") {
  RngStream rng(4);
  ParamStore store;
  Mlp mlp(store, rng, "f", 7, {12, 5}, 3, Activation::Relu);
  Tape tape;
  GraphParams p(tape, store);
  Var out = mlp.apply(p, tape.constant(Tensor(9, 7)));
  CHECK(tape.value(out).rows() == 9);
  CHECK(tape.value(out).cols() == 3);
}
