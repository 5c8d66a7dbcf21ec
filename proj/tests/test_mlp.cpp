#include <doctest.h>

#include "mpo_lab/mlp.hpp"
#include "support/finite_diff.hpp"

using namespace mpo;

TEST_CASE("zero network maps any input to zero") {
  MlpParams net = make_mlp({3, 4, 2}, Activation::kTanh);
  Rng rng(1);
  const Vector out = mlp_forward(net, Vector(rng.normal_vector(3)));
  CHECK(out.isZero(0.0));
}

TEST_CASE("identity single layer with tanh hidden-free net is affine") {
  MlpParams net = make_mlp({2, 2}, Activation::kTanh);
  net.weights[0] = Matrix::Identity(2, 2);
  const Vector out = mlp_forward(net, Vector(Vector::Zero(2)));
  CHECK(out.isZero(0.0));
  // single layer is linear, so it reproduces the input
  Vector x(2);
  x << 0.3, -0.7;
  CHECK((mlp_forward(net, x) - x).norm() == doctest::Approx(0.0));
}

TEST_CASE("forward matches an independent layer-by-layer re-evaluation") {
  Rng rng(7);
  MlpParams net = make_mlp({3, 5, 4, 2}, Activation::kTanh);
  init_mlp(net, rng);
  const Vector x = rng.normal_vector(3);

  Vector h = x;
  for (int l = 0; l < net.num_layers(); ++l) {
    Vector z = net.weights[l] * h + net.biases[l];
    h = (l + 1 < net.num_layers()) ? Vector(z.array().tanh()) : z;
  }
  CHECK((mlp_forward(net, x) - h).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("forward is deterministic bitwise") {
  Rng rng(3);
  MlpParams net = make_mlp({4, 8, 3}, Activation::kElu);
  init_mlp(net, rng);
  const Vector x = rng.normal_vector(4);
  const Vector a = mlp_forward(net, x);
  const Vector b = mlp_forward(net, x);
  for (Index i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("batched forward equals per-column forward") {
  Rng rng(9);
  MlpParams net = make_mlp({3, 6, 2}, Activation::kTanh);
  init_mlp(net, rng);
  const Matrix x = rng.normal_matrix(3, 5);
  const Matrix y = mlp_forward(net, x);
  for (Index c = 0; c < 5; ++c)
    CHECK((y.col(c) - mlp_forward(net, Vector(x.col(c)))).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
  Rng rng(11);
  MlpParams net = make_mlp({3, 4, 2}, Activation::kTanh);
  init_mlp(net, rng);
  MlpCache cache;
  mlp_forward(net, Vector(rng.normal_vector(3)), &cache);
  auto [grads, input_grad] = mlp_backward(net, cache, Matrix(Matrix::Zero(2, 1)));
  CHECK(grads.squared_norm() == 0.0);
  CHECK(input_grad.isZero(0.0));
}

TEST_CASE("linear layer weight gradient is the input") {
  MlpParams net = make_mlp({3, 1}, Activation::kTanh);
  net.weights[0] = Matrix::Random(1, 3);
  Vector x(3);
  x << 0.5, -1.0, 2.0;
  MlpCache cache;
  mlp_forward(net, x, &cache);
  auto [grads, input_grad] = mlp_backward(net, cache, Matrix(Matrix::Ones(1, 1)));
  CHECK((grads.d_weights[0].transpose() - x).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(grads.d_biases[0][0] == 1.0);
}

TEST_CASE("backward matches central finite differences on random nets") {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Rng rng(100 + trial);
    const Activation act = trial % 2 == 0 ? Activation::kTanh : Activation::kElu;
    MlpParams net = make_mlp({3, 5, 4, 2}, act);
    init_mlp(net, rng);
    const Vector x = rng.normal_vector(3);
    const Vector seed_grad = rng.normal_vector(2);

    MlpCache cache;
    mlp_forward(net, x, &cache);
    auto [grads, input_grad] = mlp_backward(net, cache, Matrix(seed_grad));

    const auto fd = mpo::testing::finite_diff_grads(
        net, [&](const MlpParams& p) { return seed_grad.dot(mlp_forward(p, x)); });
    CHECK(mpo::testing::max_grad_mismatch(grads, fd) < 1e-4);
  }
}

TEST_CASE("backward input gradient matches finite differences") {
  Rng rng(55);
  MlpParams net = make_mlp({4, 6, 3}, Activation::kElu);
  init_mlp(net, rng);
  Vector x = rng.normal_vector(4);
  const Vector seed_grad = rng.normal_vector(3);
  MlpCache cache;
  mlp_forward(net, x, &cache);
  auto [grads, input_grad] = mlp_backward(net, cache, Matrix(seed_grad));
  for (Index i = 0; i < x.size(); ++i) {
    const double fd = mpo::testing::central_diff(
        [&](double v) {
          Vector xx = x;
          xx[i] = v;
          return seed_grad.dot(mlp_forward(net, xx));
        },
        x[i]);
    CHECK(std::abs(input_grad(i, 0) - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("shape mismatches are rejected") {
  MlpParams net = make_mlp({3, 2}, Activation::kTanh);
  CHECK_THROWS_AS(mlp_forward(net, Vector(Vector::Zero(4))), DimensionError);
  MlpCache cache;
  mlp_forward(net, Vector(Vector::Zero(3)), &cache);
  CHECK_THROWS_AS(mlp_backward(net, cache, Matrix(Matrix::Zero(3, 1))), DimensionError);
}
