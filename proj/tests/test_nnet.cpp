#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "edlab/nnet.hpp"

using namespace edlab;

namespace {

MlpModel linear_model(const MatrixX& w, const VectorX& b) {
  MlpModel m;
  m.layer_dims = {w.cols(), w.rows()};
  m.weights = {w};
  m.biases = {b};
  return m;
}

}  // namespace

TEST_CASE("init zeroes biases") {
  const MlpModel m = mlp_init({1, 1}, Activation::Tanh, 42);
  CHECK(m.biases[0][0] == 0.0);
}

TEST_CASE("init is deterministic in (dims, seed)") {
  const MlpModel a = mlp_init({2, 3, 2}, Activation::ReLU, 7);
  const MlpModel b = mlp_init({2, 3, 2}, Activation::ReLU, 7);
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    CHECK(a.weights[l].cwiseEqual(b.weights[l]).all());
    CHECK(a.biases[l].cwiseEqual(b.biases[l]).all());
  }
  const MlpModel c = mlp_init({2, 3, 2}, Activation::ReLU, 8);
  CHECK_FALSE(a.weights[0].cwiseEqual(c.weights[0]).all());
}

TEST_CASE("init scale tracks 1/sqrt(fan_in)") {
  const MlpModel m = mlp_init({4, 50, 1}, Activation::Tanh, 0);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const Real fan_in = static_cast<Real>(m.layer_dims[l]);
    const Real target = 1.0 / std::sqrt(fan_in);
    const Real mean = m.weights[l].mean();
    const Real sd = std::sqrt((m.weights[l].array() - mean).square().mean());
    CHECK(std::abs(sd - target) / target < 0.25);
  }
}

TEST_CASE("init rejects bad dims") {
  CHECK_THROWS_AS(mlp_init({3}, Activation::Tanh, 0), std::invalid_argument);
  CHECK_THROWS_AS(mlp_init({3, 0, 1}, Activation::Tanh, 0), std::invalid_argument);
}

TEST_CASE("forward of the zero model is zero") {
  MlpModel m = mlp_init({3, 4, 2}, Activation::Tanh, 1);
  for (auto& w : m.weights) w.setZero();
  VectorX x(3);
  x << 0.3, -1.0, 2.0;
  CHECK(mlp_forward(m, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single linear layer is affine") {
  MatrixX w(1, 2);
  w << 2.0, 0.0;
  VectorX b(1);
  b << 1.0;
  VectorX x(2);
  x << 3.0, 5.0;
  CHECK(mlp_forward(linear_model(w, b), x)[0] == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("two-layer tanh forward matches hand evaluation") {
  MlpModel m;
  m.layer_dims = {1, 2, 1};
  m.activation = Activation::Tanh;
  MatrixX w1(2, 1);
  w1 << 1.0, -2.0;
  VectorX b1(2);
  b1 << 0.5, -0.5;
  MatrixX w2(1, 2);
  w2 << 1.5, -0.25;
  VectorX b2(1);
  b2 << 0.25;
  m.weights = {w1, w2};
  m.biases = {b1, b2};

  VectorX x(1);
  x << 0.8;
  const Real by_hand =
      1.5 * std::tanh(1.0 * 0.8 + 0.5) - 0.25 * std::tanh(-2.0 * 0.8 - 0.5) + 0.25;
  CHECK(mlp_forward(m, x)[0] == doctest::Approx(by_hand).epsilon(1e-14));
}

TEST_CASE("forward rejects dimension mismatch") {
  const MlpModel m = mlp_init({2, 1}, Activation::Tanh, 0);
  VectorX x(3);
  x.setZero();
  CHECK_THROWS_AS(mlp_forward(m, x), std::invalid_argument);
}

TEST_CASE("forward is a pure function") {
  const MlpModel m = mlp_init({3, 5, 2}, Activation::Tanh, 3);
  VectorX x(3);
  x << 0.1, -0.7, 1.3;
  CHECK(mlp_forward(m, x).cwiseEqual(mlp_forward(m, x)).all());
}

TEST_CASE("softmax basics") {
  VectorX z(2);
  z << 0.0, 0.0;
  const VectorX p = softmax(z);
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));

  z << std::log(2.0), 0.0;
  const VectorX q = softmax(z);
  CHECK(q[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  z << 1000.0, 0.0;
  const VectorX r = softmax(z);
  CHECK(r.allFinite());
  CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("softmax rejects nan") {
  VectorX z(2);
  z << std::nan(""), 0.0;
  CHECK_THROWS_AS(softmax(z), std::invalid_argument);
}

TEST_CASE("softmax properties: normalization and shift invariance") {
  std::mt19937_64 rng(5);
  std::normal_distribution<Real> g(0.0, 4.0);
  for (int trial = 0; trial < 200; ++trial) {
    VectorX z(4);
    for (int i = 0; i < 4; ++i) z[i] = g(rng);
    const VectorX p = softmax(z);
    CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
    CHECK(p.minCoeff() > 0.0);
    const VectorX shifted = softmax(z.array() + 57.25);
    CHECK((p - shifted).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("backward with zero upstream is zero") {
  const MlpModel m = mlp_init({3, 4, 2}, Activation::Tanh, 9);
  VectorX x(3), upstream(2);
  x << 1.0, 2.0, 3.0;
  upstream.setZero();
  const GradientSet g = mlp_backward(m, x, upstream);
  for (const auto& w : g.weights) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& b : g.biases) CHECK(b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward of a single linear layer") {
  MatrixX w(1, 2);
  w << 2.0, -1.0;
  VectorX b(1);
  b << 0.5;
  VectorX x(2), upstream(1);
  x << 3.0, 5.0;
  upstream << 1.0;
  const GradientSet g = mlp_backward(linear_model(w, b), x, upstream);
  CHECK(g.weights[0](0, 0) == 3.0);
  CHECK(g.weights[0](0, 1) == 5.0);
  CHECK(g.biases[0][0] == 1.0);
}

TEST_CASE("backward matches finite differences") {
  std::mt19937_64 rng(17);
  std::normal_distribution<Real> g(0.0, 1.0);
  Real worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const bool relu = trial % 2;
    MlpModel m =
        mlp_init({3, 4, 2}, relu ? Activation::ReLU : Activation::Tanh, rng());
    VectorX x(3), upstream(2);
    for (int i = 0; i < 3; ++i) x[i] = g(rng);
    for (int i = 0; i < 2; ++i) upstream[i] = g(rng);
    if (relu) m = nudge_relu_preactivations(m, x);
    const GradientSet analytic = mlp_backward(m, x, upstream);
    const Real err = grad_check(
        m, [&](const MlpModel& probe) { return upstream.dot(mlp_forward(probe, x)); },
        analytic);
    worst = std::max(worst, err);
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("grad_check on a quadratic objective is near exact") {
  MatrixX w(1, 2);
  w << 0.7, -0.3;
  VectorX b(1);
  b << 0.1;
  const MlpModel m = linear_model(w, b);
  VectorX x(2);
  x << 1.2, -0.4;
  const Real y = 0.9;

  const Real h = mlp_forward(m, x)[0];
  VectorX upstream(1);
  upstream << -2.0 * (y - h);
  const GradientSet analytic = mlp_backward(m, x, upstream);
  const Real err = grad_check(
      m,
      [&](const MlpModel& probe) {
        const Real r = y - mlp_forward(probe, x)[0];
        return r * r;
      },
      analytic);
  CHECK(err <= 1e-9);
}

TEST_CASE("grad_check on a softmax log loss") {
  std::mt19937_64 rng(23);
  const MlpModel m = mlp_init({2, 5, 3}, Activation::Tanh, rng());
  VectorX x(2);
  x << 0.4, -1.1;
  const int y = 2;

  const VectorX p = softmax(mlp_forward(m, x));
  VectorX upstream(3);
  for (int c = 0; c < 3; ++c) upstream[c] = p[c] - (c == y ? 1.0 : 0.0);
  const GradientSet analytic = mlp_backward(m, x, upstream);
  const Real err = grad_check(
      m,
      [&](const MlpModel& probe) {
        return -std::log(softmax(mlp_forward(probe, x))[y]);
      },
      analytic);
  CHECK(err <= 1e-5);
}

TEST_CASE("grad_check over an empty parameter set is zero") {
  MlpModel degenerate;
  degenerate.layer_dims = {1, 1};
  GradientSet empty;
  const Real err =
      grad_check(degenerate, [](const MlpModel&) { return 1.0; }, empty);
  CHECK(err == 0.0);
}

TEST_CASE("parameter flattening round trip") {
  MlpModel m = mlp_init({2, 3, 2}, Activation::Tanh, 31);
  const VectorX theta = flatten_parameters(m);
  CHECK(theta.size() == m.parameter_count());
  MlpModel copy = mlp_init({2, 3, 2}, Activation::Tanh, 99);
  set_parameters(copy, theta);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    CHECK(copy.weights[l].cwiseEqual(m.weights[l]).all());
    CHECK(copy.biases[l].cwiseEqual(m.biases[l]).all());
  }
}

TEST_CASE("relu nudging clears the kink neighborhood") {
  MlpModel m = mlp_init({2, 6, 1}, Activation::ReLU, 3);
  VectorX x(2);
  x << 0.0, 0.0;  // all pre-activations are exactly the biases (zero)
  const MlpModel nudged = nudge_relu_preactivations(m, x, 1e-3);
  const VectorX z = nudged.weights[0] * x + nudged.biases[0];
  CHECK(z.cwiseAbs().minCoeff() >= 1e-3);
}
