#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "oracles.hpp"
#include "hydramix/numerics/ops.hpp"
#include "hydramix/numerics/optim.hpp"
#include "hydramix/training/gradcheck.hpp"

namespace ops = hydramix::numerics;
using hydramix::RngStream;
using ops::Tensor;
using testing::random_tensor;
using oracle::conv_oracle;

namespace {

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("conv2d equals the nested-loop oracle") {
  RngStream rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = random_tensor({2, 3, 8, 8}, rng);
    const auto w = random_tensor({4, 3, 3, 3}, rng);
    for (int stride : {1, 2})
      for (int pad : {0, 1}) {
        const auto got = ops::conv2d(x, w, Tensor<double>(), stride, pad);
        const auto want = conv_oracle(x, w, stride, pad);
        REQUIRE(got.shape() == want.shape());
        CHECK(testing::max_abs_diff(got, want) <= 1e-10);
      }
  }
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
  RngStream rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_tensor({2, 3, 7, 7}, rng);
    const auto w = random_tensor({4, 3, 3, 3}, rng);
    const auto cx = ops::conv2d(x, w, Tensor<double>(), 2, 1);
    const auto y = random_tensor(cx.shape(), rng);
    const auto ty = ops::conv_transpose2d(y, w, Tensor<double>(), 2, 1);
    REQUIRE(ty.shape() == x.shape());
    CHECK(std::abs(dot(cx, y) - dot(x, ty)) <= 1e-10);
  }
}

TEST_CASE("conv2d rejects mismatched channels with a dimension error") {
  RngStream rng(1);
  const auto x = random_tensor({1, 3, 5, 5}, rng);
  const auto w = random_tensor({2, 4, 3, 3}, rng);
  CHECK_THROWS_AS(ops::conv2d(x, w, Tensor<double>(), 1, 1), ops::DimensionError);
}

TEST_CASE("instance_norm standardizes every slice") {
  RngStream rng(13);
  const auto x = random_tensor({2, 4, 5, 5}, rng, -3, 5);
  const auto y = ops::instance_norm(x, 1e-5);
  for (std::size_t s = 0; s < 8; ++s) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 25; ++i) m += y[s * 25 + i];
    m /= 25;
    for (std::size_t i = 0; i < 25; ++i) v += (y[s * 25 + i] - m) * (y[s * 25 + i] - m);
    v /= 25;
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(v - 1) < 1e-4);
  }
}

TEST_CASE("bilinear resize follows the half-pixel convention with edge clamping") {
  // Source coordinates (d + 0.5) * 2/4 - 0.5 = -0.25, 0.25, 0.75, 1.25; the
  // outer two clamp to the edge pixels.
  const Tensor<double> x({1, 1, 2, 1}, std::vector<double>{0.0, 1.0});
  const auto y = ops::resize(x, 4, 1, ops::ResizeMode::bilinear);
  const double want[] = {0.0, 0.25, 0.75, 1.0};
  for (int i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("bilinear resize of a constant image is constant") {
  const Tensor<double> x({1, 2, 3, 5}, 0.7);
  const auto y = ops::resize(x, 7, 4, ops::ResizeMode::bilinear);
  for (double v : y.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-14));
}

TEST_CASE("nearest resize picks floor-mapped sources") {
  RngStream rng(3);
  const auto x = random_tensor({1, 1, 3, 4}, rng);
  const auto y = ops::resize(x, 7, 9, ops::ResizeMode::nearest);
  for (std::size_t r = 0; r < 7; ++r)
    for (std::size_t c = 0; c < 9; ++c) CHECK(y[r * 9 + c] == x[(r * 3 / 7) * 4 + c * 4 / 9]);
}

TEST_CASE("mse of conv2d has finite-difference gradients") {
  RngStream rng(21);
  const auto t = random_tensor({1, 2, 4, 4}, rng);
  const auto r = hydramix::training::gradcheck(
      "mse_conv",
      [t](const std::vector<Tensor<double>>& in) {
        return ops::mse_loss(ops::conv2d(in[0], in[1], Tensor<double>(), 1, 1), t);
      },
      {random_tensor({1, 3, 4, 4}, rng), random_tensor({2, 3, 3, 3}, rng)}, 1e-4, 5);
  CHECK(r.passed());
  CHECK(r.max_rel_error < 1e-4);
  CHECK(r.skipped == 0);
}

TEST_CASE("every primitive passes the gradient check across seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (const auto& r : hydramix::training::run_gradcheck_suite(seed, false)) {
      INFO("seed " << seed << " op " << r.name << " error " << r.max_rel_error);
      CHECK(r.passed());
      CHECK(r.max_rel_error <= 1e-4);
    }
  }
}

TEST_CASE("the tape accumulates gradients of shared inputs") {
  ops::Tape<double> tape;
  Tensor<double> x({3}, std::vector<double>{1, 2, 3});
  x.set_requires_grad(true);
  Tensor<double> loss;
  {
    ops::TapeScope<double> scope(tape);
    loss = ops::sum(ops::mul(x, x));
  }
  tape.backward(loss);
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 4.0);
  CHECK(x.grad()[2] == 6.0);
}

TEST_CASE("ops without an active tape record nothing") {
  Tensor<double> x({2}, 1.0);
  x.set_requires_grad(true);
  const auto y = ops::scale(x, 2.0);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("branch traces distinguish activation sides and refuse nesting") {
  const Tensor<double> pos({2}, std::vector<double>{0.5, 0.5});
  const Tensor<double> neg({2}, std::vector<double>{0.5, -0.5});
  std::uint64_t a, b, c;
  {
    ops::BranchTrace t;
    ops::activation(pos, ops::Activation::relu());
    a = t.fingerprint();
  }
  {
    ops::BranchTrace t;
    ops::activation(neg, ops::Activation::relu());
    b = t.fingerprint();
  }
  {
    ops::BranchTrace t;
    ops::activation(Tensor<double>({2}, std::vector<double>{0.9, 0.1}), ops::Activation::relu());
    c = t.fingerprint();
    CHECK_THROWS_AS(ops::BranchTrace(), ops::ContractError);
  }
  CHECK(a != b);
  CHECK(a == c);
}

TEST_CASE("adam first step moves by the learning rate") {
  Tensor<double> p({1}, 0.0);
  p.mutable_grad()[0] = 1.0;
  std::vector<ops::AdamState<double>> st{ops::AdamState<double>::for_param(p, 0.5, 0.999, 1e-8)};
  std::vector<Tensor<double>> ps{p};
  ops::adam_step<double>(ps, st, 2e-4, 0.0);
  CHECK(p[0] == doctest::Approx(-2e-4 / (1 + 1e-8)).epsilon(1e-12));
  CHECK(p.grad()[0] == 0.0);
}

TEST_CASE("two adam steps match the unrolled recurrence") {
  const double lr = 1e-3, wd = 0.01, b1 = 0.5, b2 = 0.999, eps = 1e-8;
  const double g1 = 0.3, g2 = -1.7, p0 = 0.25;
  Tensor<double> p({1}, p0);
  std::vector<ops::AdamState<double>> st{ops::AdamState<double>::for_param(p, b1, b2, eps)};
  std::vector<Tensor<double>> ps{p};
  p.mutable_grad()[0] = g1;
  ops::adam_step<double>(ps, st, lr, wd);
  p.mutable_grad()[0] = g2;
  ops::adam_step<double>(ps, st, lr, wd);

  double q = p0, m = 0, v = 0;
  const double gs[] = {g1, g2};
  for (int t = 1; t <= 2; ++t) {
    q = q - lr * wd * q;
    m = b1 * m + (1 - b1) * gs[t - 1];
    v = b2 * v + (1 - b2) * gs[t - 1] * gs[t - 1];
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    q -= lr * mh / (std::sqrt(vh) + eps);
  }
  CHECK(std::abs(p[0] - q) <= 1e-12);
}

TEST_CASE("sgd with momentum follows the heavy-ball rule") {
  Tensor<double> p({1}, 1.0);
  std::vector<Tensor<double>> ps{p};
  std::vector<std::vector<double>> vel{{0.0}};
  p.mutable_grad()[0] = 0.5;
  ops::sgd_momentum_step<double>(ps, vel, 0.1, 0.9, 0.0);
  CHECK(p[0] == doctest::Approx(0.95));
  p.mutable_grad()[0] = 0.5;
  ops::sgd_momentum_step<double>(ps, vel, 0.1, 0.9, 0.0);
  CHECK(p[0] == doctest::Approx(0.95 - 0.1 * (0.9 * 0.5 + 0.5)));
}

TEST_CASE("bce clamps probabilities and cross-entropy matches log-softmax") {
  const Tensor<double> prob({2}, std::vector<double>{0.0, 1.0});
  const Tensor<double> target({2}, std::vector<double>{1.0, 0.0});
  CHECK(ops::bce_loss(prob, target)[0] == doctest::Approx(-std::log(ops::kBceClamp)).epsilon(1e-9));

  const Tensor<double> logits({1, 3}, std::vector<double>{1.0, 2.0, 0.5});
  const int label[] = {1};
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5));
  CHECK(ops::softmax_cross_entropy<double>(logits, label)[0] == doctest::Approx(lse - 2.0).epsilon(1e-12));
}

}  // TEST_SUITE
