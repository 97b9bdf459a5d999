#include <doctest.h>

#include <cmath>
#include <functional>

#include "icepose/rng.hpp"
#include "icepose/tensor.hpp"

using icepose::Rng;
using icepose::autodiff::finite_diff_grad;
using icepose::autodiff::Graph;
using icepose::autodiff::Tensor;
using icepose::autodiff::Value;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -2.0, double hi = 2.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Compares reverse-mode gradient w.r.t. x against central differences for a
// scalar loss assembled by `build`.
void check_grad(const Tensor& x,
                const std::function<Value(Graph&, Value)>& build, double tol = 1e-4) {
  Graph g;
  Tensor xg = x;
  xg.requires_grad = true;
  const Value xv = g.leaf(xg);
  const Value loss = build(g, xv);
  g.backward(loss);
  const Tensor& ad = g.grad(xv);

  const Tensor fd = finite_diff_grad(
      [&](const Tensor& p) {
        Graph g2;
        const Value pv = g2.leaf(p, false);
        return g2.value(build(g2, pv))[0];
      },
      x);

  REQUIRE(ad.same_shape(fd));
  for (Eigen::Index i = 0; i < ad.size(); ++i) {
    INFO("component ", i, ": ad=", ad[i], " fd=", fd[i]);
    CHECK(rel_err(ad[i], fd[i]) < tol);
  }
}

// Weighting the op output by a fixed random tensor makes the incoming
// gradient non-uniform, which exercises the backward formulas properly.
std::function<Value(Graph&, Value)> weighted(
    const Tensor& w, const std::function<Value(Graph&, Value)>& op) {
  return [w, op](Graph& g, Value x) {
    const Value fx = op(g, x);
    return g.sum(g.mul(fx, g.leaf(w, false)));
  };
}

}  // namespace

TEST_CASE("matmul identity and hand-multiplied example") {
  Graph g;
  const Value i2 = g.leaf(Tensor::from({2, 2}, {1, 0, 0, 1}), false);
  const Value prod = g.matmul(i2, i2);
  CHECK(g.value(prod).at(0, 0) == 1.0);
  CHECK(g.value(prod).at(0, 1) == 0.0);
  CHECK(g.value(prod).at(1, 1) == 1.0);

  const Value a = g.leaf(Tensor::from({2, 2}, {1, 2, 3, 4}), false);
  const Value b = g.leaf(Tensor::from({2, 1}, {1, 1}), false);
  const Value c = g.matmul(a, b);
  CHECK(g.value(c).shape() == std::vector<int>{2, 1});
  CHECK(g.value(c)[0] == 3.0);
  CHECK(g.value(c)[1] == 7.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Graph g;
  const Value a = g.leaf(Tensor::zeros({2, 3}), false);
  const Value b = g.leaf(Tensor::zeros({4, 5}), false);
  CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("[2x3]"), icepose::ShapeError);
  CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("[4x5]"), icepose::ShapeError);
}

TEST_CASE("matmul associativity on random conforming triples") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    const Value a = g.leaf(random_tensor(rng, {3, 4}), false);
    const Value b = g.leaf(random_tensor(rng, {4, 5}), false);
    const Value c = g.leaf(random_tensor(rng, {5, 2}), false);
    const Tensor& left = g.value(g.matmul(g.matmul(a, b), c));
    const Tensor& right = g.value(g.matmul(a, g.matmul(b, c)));
    for (Eigen::Index i = 0; i < left.size(); ++i)
      CHECK(rel_err(left[i], right[i]) < 1e-9);
  }
}

TEST_CASE("elementwise identities") {
  Graph g;
  const Value x = g.leaf(Tensor::from({3}, {1.5, -2.0, 0.25}), false);
  const Value zero = g.leaf(Tensor::zeros({3}), false);
  const Tensor& sum = g.value(g.add(x, zero));
  CHECK(sum[0] == 1.5);
  CHECK(sum[1] == -2.0);
  CHECK(sum[2] == 0.25);

  const Tensor& zero_gelu = g.value(g.gelu(zero));
  CHECK(zero_gelu[0] == 0.0);

  const Value a = g.leaf(Tensor::from({2}, {2, 3}), false);
  const Value b = g.leaf(Tensor::from({2}, {4, 5}), false);
  const Tensor& prod = g.value(g.mul(a, b));
  CHECK(prod[0] == 8.0);
  CHECK(prod[1] == 15.0);

  CHECK_THROWS_AS(g.add(x, a), icepose::ShapeError);
}

TEST_CASE("softmax examples and row-sum invariant") {
  Graph g;
  const Tensor& constant = g.value(g.softmax(g.leaf(Tensor::full({3}, 4.2), false)));
  for (int i = 0; i < 3; ++i) CHECK(constant[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));

  const Tensor& closed = g.value(g.softmax(g.leaf(Tensor::from({2}, {0.0, std::log(3.0)}), false)));
  CHECK(closed[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(closed[1] == doctest::Approx(0.75).epsilon(1e-12));

  const Tensor& stable = g.value(g.softmax(g.leaf(Tensor::from({2}, {1000.0, 0.0}), false)));
  CHECK(stable.all_finite());
  CHECK(stable[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(stable[1] == doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g2;
    const Tensor& s = g2.value(g2.softmax(g2.leaf(random_tensor(rng, {4, 7}, -30, 30), false)));
    auto m = s.matrix();
    for (int r = 0; r < 4; ++r) {
      CHECK(std::abs(m.row(r).sum() - 1.0) <= 1e-12);
      CHECK(m.row(r).minCoeff() > 0.0);
    }
  }
}

TEST_CASE("layer_norm examples") {
  Graph g;
  const Value gain = g.leaf(Tensor::full({1, 4}, 1.0), false);
  const Value bias = g.leaf(Tensor::zeros({1, 4}), false);

  const Tensor& flat = g.value(g.layer_norm(g.leaf(Tensor::full({1, 4}, 7.0), false), gain, bias));
  for (int i = 0; i < 4; ++i) CHECK(flat[i] == doctest::Approx(0.0).epsilon(1e-12));

  const Value two = g.leaf(Tensor::from({1, 2}, {1.0, -1.0}), false);
  const Value gain2 = g.leaf(Tensor::full({1, 2}, 1.0), false);
  const Value bias2 = g.leaf(Tensor::zeros({1, 2}), false);
  const Tensor& standardized = g.value(g.layer_norm(two, gain2, bias2));
  CHECK(standardized[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(standardized[1] == doctest::Approx(-1.0).epsilon(1e-4));

  const Value gain0 = g.leaf(Tensor::zeros({1, 2}), false);
  const Value biasb = g.leaf(Tensor::full({1, 2}, 5.5), false);
  const Tensor& collapsed = g.value(g.layer_norm(two, gain0, biasb));
  CHECK(collapsed[0] == 5.5);
  CHECK(collapsed[1] == 5.5);
}

TEST_CASE("layer_norm standardizes rows before the affine map") {
  Rng rng(17);
  Graph g;
  const int d = 9;
  const Value gain = g.leaf(Tensor::full({1, d}, 1.0), false);
  const Value bias = g.leaf(Tensor::zeros({1, d}), false);
  const Tensor& out =
      g.value(g.layer_norm(g.leaf(random_tensor(rng, {5, d}, -10, 10), false), gain, bias));
  auto m = out.matrix();
  for (int r = 0; r < 5; ++r) {
    CHECK(std::abs(m.row(r).mean()) < 1e-9);
    const double var = (m.row(r).array() - m.row(r).mean()).square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));  // eps skews variance slightly
  }
}

TEST_CASE("backward on linear and quadratic losses") {
  Graph g;
  Tensor x = Tensor::from({3}, {5.0, -1.0, 2.0});
  x.requires_grad = true;
  const Value xv = g.leaf(x);
  g.backward(g.sum(xv));
  const Tensor& lin = g.grad(xv);
  for (int i = 0; i < 3; ++i) CHECK(lin[i] == 1.0);

  Graph g2;
  Tensor y = Tensor::from({2}, {1.0, 2.0});
  y.requires_grad = true;
  const Value yv = g2.leaf(y);
  g2.backward(g2.sum(g2.mul(yv, yv)));
  CHECK(g2.grad(yv)[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g2.grad(yv)[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar roots") {
  Graph g;
  Tensor x = Tensor::zeros({2, 2});
  x.requires_grad = true;
  const Value xv = g.leaf(x);
  CHECK_THROWS_AS(g.backward(xv), icepose::ContractError);
}

TEST_CASE("repeated backward accumulates; zero_grad resets") {
  Graph g;
  Tensor x = Tensor::from({2}, {3.0, 4.0});
  x.requires_grad = true;
  const Value xv = g.leaf(x);
  const Value loss = g.sum(g.mul(xv, xv));
  g.backward(loss);
  g.backward(loss);
  CHECK(g.grad(xv)[0] == doctest::Approx(12.0).epsilon(1e-12));  // 2 * 2x
  g.zero_grad();
  g.backward(loss);
  CHECK(g.grad(xv)[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("diamond graph: shared subexpression gradients add across paths") {
  // loss = sum(2x + x*x); dloss/dx = 2 + 2x.
  Graph g;
  Tensor x = Tensor::from({3}, {1.0, -2.0, 0.5});
  x.requires_grad = true;
  const Value xv = g.leaf(x);
  const Value left = g.scale(xv, 2.0);
  const Value right = g.mul(xv, xv);
  g.backward(g.sum(g.add(left, right)));
  const Tensor& grad = g.grad(xv);
  for (int i = 0; i < 3; ++i)
    CHECK(grad[i] == doctest::Approx(2.0 + 2.0 * x[i]).epsilon(1e-12));
}

TEST_CASE("finite_diff_grad examples") {
  const Tensor ones_expected = finite_diff_grad(
      [](const Tensor& t) { return t.array().sum(); }, Tensor::from({4}, {1, 2, 3, 4}));
  for (int i = 0; i < 4; ++i) CHECK(ones_expected[i] == doctest::Approx(1.0).epsilon(1e-9));

  const Tensor quad = finite_diff_grad(
      [](const Tensor& t) { return t[0] * t[0]; }, Tensor::from({1}, {3.0}));
  CHECK(std::abs(quad[0] - 6.0) < 1e-6);
}

TEST_CASE("every differentiable op matches finite differences at random points") {
  Rng rng(2024);
  const int kTrials = 100;

  for (int trial = 0; trial < kTrials; ++trial) {
    const Tensor w34 = random_tensor(rng, {3, 4});
    const Tensor w43 = random_tensor(rng, {4, 3});
    const Tensor w24 = random_tensor(rng, {2, 4});
    const Tensor w32 = random_tensor(rng, {3, 2});
    const Tensor w54 = random_tensor(rng, {5, 4});
    const Tensor w37 = random_tensor(rng, {3, 7});
    const Tensor w33 = random_tensor(rng, {3, 3});
    const Tensor rhs = random_tensor(rng, {3, 4});
    const Tensor rhs43 = random_tensor(rng, {4, 3});
    const Tensor below = random_tensor(rng, {2, 4});
    const Tensor beside = random_tensor(rng, {3, 3});

    const Tensor x = random_tensor(rng, {3, 4});

    check_grad(x, weighted(w34, [&](Graph& g, Value v) { return g.add(v, g.leaf(rhs, false)); }));
    check_grad(x, weighted(w34, [&](Graph& g, Value v) { return g.sub(v, g.leaf(rhs, false)); }));
    check_grad(x, weighted(w34, [&](Graph& g, Value v) { return g.mul(v, g.leaf(rhs, false)); }));
    check_grad(x, weighted(w34, [&](Graph& g, Value v) { return g.scale(v, -1.7); }));
    check_grad(x, weighted(w34, [&](Graph& g, Value v) { return g.gelu(v); }));
    check_grad(x, weighted(w34, [&](Graph& g, Value v) { return g.softmax(v); }));
    check_grad(x, weighted(w43, [&](Graph& g, Value v) { return g.transpose(v); }));
    check_grad(x, weighted(w33, [&](Graph& g, Value v) {
      return g.matmul(v, g.leaf(rhs43, false));
    }));
    check_grad(x, weighted(w24, [&](Graph& g, Value v) { return g.slice_rows(v, 1, 3); }));
    check_grad(x, weighted(w32, [&](Graph& g, Value v) { return g.slice_cols(v, 1, 3); }));
    check_grad(x, weighted(w54, [&](Graph& g, Value v) {
      return g.concat_rows(v, g.leaf(below, false));
    }));
    check_grad(x, weighted(w37, [&](Graph& g, Value v) {
      return g.concat_cols(v, g.leaf(beside, false));
    }));
    check_grad(x, [](Graph& g, Value v) { return g.sum(v); });

    const Tensor row = random_tensor(rng, {1, 4});
    check_grad(row, weighted(w54, [&](Graph& g, Value v) { return g.repeat_rows(v, 5); }));

    const Tensor gain = random_tensor(rng, {1, 4}, 0.5, 1.5);
    const Tensor bias = random_tensor(rng, {1, 4});
    check_grad(x, weighted(w34, [&](Graph& g, Value v) {
      return g.layer_norm(v, g.leaf(gain, false), g.leaf(bias, false));
    }));
    // layer_norm gradients w.r.t. gain and bias.
    check_grad(gain, weighted(w34, [&](Graph& g, Value v) {
      return g.layer_norm(g.leaf(x, false), v, g.leaf(bias, false));
    }));
    check_grad(bias, weighted(w34, [&](Graph& g, Value v) {
      return g.layer_norm(g.leaf(x, false), g.leaf(gain, false), v);
    }));
  }
}

TEST_CASE("tensor construction rejects bad shapes and non-finite values") {
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), icepose::ShapeError);
  CHECK_THROWS_AS(Tensor::from({2}, {1.0, 2.0, 3.0}), icepose::ShapeError);
  CHECK_THROWS_AS(Tensor::from({1}, {std::numeric_limits<double>::infinity()}),
                  icepose::NumericError);
  CHECK_THROWS_AS(Tensor::from({1}, {std::nan("")}), icepose::NumericError);
}
