#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nsub/errors.hpp"
#include "nsub/mlp.hpp"
#include "oracles.hpp"

using namespace nsub;
using nsub::testing::finite_difference_gradient;
using nsub::testing::random_vector;
using nsub::testing::relative_error;

namespace {

// Flattened view of all parameters for finite differences.
Vec flatten(const MlpParams& p) {
  Vec out(static_cast<Eigen::Index>(p.parameter_count()));
  Eigen::Index k = 0;
  for (int i = 0; i < p.num_layers(); ++i) {
    for (Eigen::Index r = 0; r < p.weights[i].rows(); ++r)
      for (Eigen::Index c = 0; c < p.weights[i].cols(); ++c) out[k++] = p.weights[i](r, c);
    for (Eigen::Index r = 0; r < p.biases[i].size(); ++r) out[k++] = p.biases[i][r];
  }
  return out;
}

MlpParams unflatten(const MlpParams& shape, const Vec& flat) {
  MlpParams p = shape;
  Eigen::Index k = 0;
  for (int i = 0; i < p.num_layers(); ++i) {
    for (Eigen::Index r = 0; r < p.weights[i].rows(); ++r)
      for (Eigen::Index c = 0; c < p.weights[i].cols(); ++c) p.weights[i](r, c) = flat[k++];
    for (Eigen::Index r = 0; r < p.biases[i].size(); ++r) p.biases[i][r] = flat[k++];
  }
  return p;
}

MlpParams randomized(std::vector<int> sizes, std::uint64_t seed) {
  MlpParams p = init_mlp(sizes, seed);
  std::mt19937_64 rng(seed + 1);
  for (auto& b : p.biases) b = random_vector(rng, b.size(), 0.3);
  return p;
}

}  // namespace

TEST_CASE("init_mlp builds the requested architecture") {
  const std::vector<int> sizes = {3, 128, 128, 128, 128, 128, 6069};
  const MlpParams p = init_mlp(sizes, 0);
  CHECK(p.num_layers() == 6);
  CHECK(p.layer_sizes() == sizes);
  CHECK(p.input_width() == 3);
  CHECK(p.output_width() == 6069);
  for (int i = 0; i < 5; ++i) CHECK(p.weights[i].rows() == 128);
  for (const auto& b : p.biases) CHECK(b.isZero(0.0));
  const double bound = std::sqrt(6.0 / 128.0);
  CHECK(p.weights[3].cwiseAbs().maxCoeff() <= bound);
}

TEST_CASE("init_mlp zero biases and determinism") {
  const std::vector<int> tiny = {1, 2};
  const MlpParams a = init_mlp(tiny, 7);
  CHECK(a.biases[0][0] == 0.0);
  CHECK(a.biases[0][1] == 0.0);
  const std::vector<int> sizes = {4, 16, 16, 5};
  CHECK(init_mlp(sizes, 42) == init_mlp(sizes, 42));
  CHECK_FALSE(init_mlp(sizes, 42) == init_mlp(sizes, 43));
}

TEST_CASE("init_mlp rejects invalid sizes") {
  CHECK_THROWS_AS(init_mlp(std::vector<int>{3}, 0), ConfigError);
  CHECK_THROWS_AS(init_mlp(std::vector<int>{3, 0, 2}, 0), ConfigError);
}

TEST_CASE("forward of a zero-weight network is its output bias") {
  MlpParams p = init_mlp(std::vector<int>{3, 8, 4}, 1);
  for (auto& w : p.weights) w.setZero();
  p.biases.back() << 1.0, -2.0, 3.0, 0.5;
  std::mt19937_64 rng(3);
  for (int k = 0; k < 5; ++k) {
    CHECK(forward(p, random_vector(rng, 3)) == p.biases.back());
  }
}

TEST_CASE("forward of a single layer is affine") {
  MlpParams p;
  Mat w(2, 3);
  w << 1, 2, 3, -1, 0.5, 4;
  Vec b(2);
  b << 0.25, -0.75;
  p.weights = {w};
  p.biases = {b};
  Vec x(3);
  x << 0.3, -1.2, 2.0;
  CHECK((forward(p, x) - (w * x + b)).norm() == doctest::Approx(0.0));
}

TEST_CASE("forward through one ELU unit at x = -1") {
  MlpParams p;
  p.weights = {Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0)};
  p.biases = {Vec::Zero(1), Vec::Zero(1)};
  const Vec y = forward(p, Vec::Constant(1, -1.0));
  CHECK(y[0] == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-14));
  CHECK(y[0] == doctest::Approx(-0.63212).epsilon(1e-5));
}

TEST_CASE("forward rejects wrong input size") {
  const MlpParams p = init_mlp(std::vector<int>{3, 4, 2}, 0);
  CHECK_THROWS_AS(forward(p, Vec::Zero(2)), ConfigError);
  CHECK_THROWS_AS(vjp(p, Vec::Zero(3), Vec::Zero(3)), ConfigError);
}

TEST_CASE("vjp of a linear layer") {
  MlpParams p;
  Mat w(2, 3);
  w << 1, 2, 3, -1, 0.5, 4;
  p.weights = {w};
  p.biases = {Vec::Zero(2)};
  Vec x(3);
  x << 0.3, -1.2, 2.0;
  Vec u(2);
  u << 0.7, -0.4;
  const MlpVjp g = vjp(p, x, u);
  CHECK((g.param_grads.weights[0] - u * x.transpose()).norm() < 1e-15);
  CHECK((g.param_grads.biases[0] - u).norm() < 1e-15);
  CHECK((g.input_grad - w.transpose() * u).norm() < 1e-15);
}

TEST_CASE("vjp matches central finite differences on a random 3-layer net") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const MlpParams p = randomized({4, 7, 6, 3}, 100 + trial);
    const Vec x = random_vector(rng, 4);
    const Vec u = random_vector(rng, 3);
    const MlpVjp g = vjp(p, x, u);

    const Vec theta = flatten(p);
    auto by_params = [&](const Vec& t) { return u.dot(forward(unflatten(p, t), x)); };
    const Vec fd_theta = finite_difference_gradient(by_params, theta, 1e-5);
    CHECK(relative_error(flatten(g.param_grads), fd_theta) < 1e-6);

    auto by_input = [&](const Vec& xi) { return u.dot(forward(p, xi)); };
    CHECK(relative_error(g.input_grad, finite_difference_gradient(by_input, x, 1e-5)) < 1e-6);
  }
}

TEST_CASE("vjp with zero cotangent is zero") {
  const MlpParams p = randomized({3, 5, 2}, 9);
  const MlpVjp g = vjp(p, Vec::Ones(3), Vec::Zero(2));
  CHECK(flatten(g.param_grads).isZero(0.0));
  CHECK(g.input_grad.isZero(0.0));
}

TEST_CASE("vjp is linear in the cotangent") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const MlpParams p = randomized({3, 6, 6, 4}, 200 + trial);
    const Vec x = random_vector(rng, 3);
    const Vec u = random_vector(rng, 4);
    const Vec v = random_vector(rng, 4);
    const double alpha = std::normal_distribution<double>()(rng);
    const double beta = std::normal_distribution<double>()(rng);
    const MlpVjp gu = vjp(p, x, u);
    const MlpVjp gv = vjp(p, x, v);
    const MlpVjp gc = vjp(p, x, alpha * u + beta * v);
    const Vec combined = alpha * flatten(gu.param_grads) + beta * flatten(gv.param_grads);
    CHECK((flatten(gc.param_grads) - combined).cwiseAbs().maxCoeff() < 1e-12 * (1 + combined.norm()));
    CHECK((gc.input_grad - (alpha * gu.input_grad + beta * gv.input_grad)).norm() < 1e-12);
  }
}

TEST_CASE("ELU is C1 across zero") {
  const double h = 1e-7;
  const double left = (elu(0.0) - elu(-h)) / h;
  const double right = (elu(h) - elu(0.0)) / h;
  CHECK(left == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(right == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(elu_derivative(0.0) == doctest::Approx(1.0));
}

TEST_CASE("forward is pure and batch evaluation agrees column-wise") {
  std::mt19937_64 rng(8);
  const MlpParams p = randomized({2, 8, 8, 5}, 31);
  Mat xs(2, 6);
  for (int b = 0; b < 6; ++b) xs.col(b) = random_vector(rng, 2);
  const Mat batch = forward_batch(p, xs);
  for (int b = 0; b < 6; ++b) {
    const Vec single = forward(p, xs.col(b));
    CHECK((batch.col(b) - single).norm() < 1e-14);
    CHECK(forward(p, xs.col(b)) == single);
  }
}

TEST_CASE("input_jacobian agrees with vjp rows") {
  std::mt19937_64 rng(12);
  const MlpParams p = randomized({3, 9, 9, 4}, 77);
  const Vec x = random_vector(rng, 3);
  const Mat j = input_jacobian(p, x);
  for (int r = 0; r < 4; ++r) {
    const MlpVjp g = vjp(p, x, Vec::Unit(4, r));
    CHECK((j.row(r).transpose() - g.input_grad).norm() < 1e-12);
  }
}
