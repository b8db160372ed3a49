#include "hydramix/training/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hydramix/networks/networks.hpp"
#include "hydramix/numerics/ops.hpp"
#include "hydramix/training/losses.hpp"

namespace hydramix::training {

using numerics::Activation;
using numerics::Shape;
using numerics::Tensor;
using Inputs = std::vector<Tensor<double>>;

namespace {

double project(const Tensor<double>& out, const Tensor<double>& r) {
  double s = 0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * r[i];
  return s;
}

Tensor<double> uniform(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(numerics::shape_numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return Tensor<double>(std::move(shape), std::move(v));
}

/// Values with magnitude in [0.1, 1] and random sign, away from activation kinks.
Tensor<double> off_kink(Shape shape, RngStream& rng) {
  std::vector<double> v(numerics::shape_numel(shape));
  for (auto& x : v) x = (0.1 + 0.9 * rng.uniform()) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
  return Tensor<double>(std::move(shape), std::move(v));
}

/// Distinct values spaced at least 0.1 apart so max selections are stable.
Tensor<double> spaced(Shape shape, RngStream& rng) {
  const std::size_t n = numerics::shape_numel(shape);
  const auto order = rng.permutation(n);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 0.1 * static_cast<double>(order[i]) + 0.02 * rng.uniform() - 0.5 * n * 0.1;
  return Tensor<double>(std::move(shape), std::move(v));
}

}  // namespace

GradcheckResult gradcheck(const std::string& name, const GradFunction& f, Inputs inputs,
                          double tolerance, std::uint64_t seed, double step, std::size_t max_coords) {
  RngStream rng = RngStream(seed).split(name);
  for (auto& x : inputs) {
    x.set_requires_grad(true);
    x.drop_grad();
  }
  Tensor<double> r;
  double base = 0;
  std::uint64_t center = 0;
  {
    numerics::Tape<double> tape;
    Tensor<double> loss;
    {
      numerics::TapeScope<double> scope(tape);
      numerics::BranchTrace trace;
      const auto out = f(inputs);
      center = trace.fingerprint();
      r = uniform(out.shape(), rng);
      loss = numerics::sum(numerics::mul(out, r));
      base = loss[0];
    }
    tape.backward(loss);
  }

  const double floor = 1e-6 * std::max(1.0, std::abs(base));
  GradcheckResult result{name, 0.0, tolerance, 0};
  for (auto& x : inputs) {
    const std::vector<double> analytic =
        x.has_grad() ? std::vector<double>(x.grad().begin(), x.grad().end()) : std::vector<double>(x.size(), 0.0);
    const std::size_t n = x.size();
    const std::size_t probes = std::min(n, max_coords);
    for (std::size_t k = 0; k < probes; ++k) {
      const std::size_t c = probes == n ? k : k * n / probes;
      auto values = x.mutable_values();
      const double orig = values[c];
      values[c] = orig + step;
      double plus, minus;
      std::uint64_t plus_branches, minus_branches;
      {
        numerics::BranchTrace trace;
        plus = project(f(inputs), r);
        plus_branches = trace.fingerprint();
      }
      values[c] = orig - step;
      {
        numerics::BranchTrace trace;
        minus = project(f(inputs), r);
        minus_branches = trace.fingerprint();
      }
      values[c] = orig;
      if (plus_branches != center || minus_branches != center) {
        ++result.skipped;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * step);
      const double scale = std::max({std::abs(analytic[c]), std::abs(numeric), floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic[c] - numeric) / scale);
      ++result.coordinates;
    }
  }
  for (auto& x : inputs) x.drop_grad();
  return result;
}

std::vector<GradcheckResult> run_gradcheck_suite(std::uint64_t seed, bool composed) {
  namespace ops = numerics;
  RngStream rng = RngStream(seed).split("gradcheck");
  constexpr double tol = 1e-4;
  std::vector<GradcheckResult> out;
  auto check = [&](const std::string& name, const GradFunction& f, Inputs inputs) {
    out.push_back(gradcheck(name, f, std::move(inputs), tol, seed));
  };

  check("add", [](const Inputs& x) { return ops::add(x[0], x[1]); },
        {uniform({2, 3}, rng), uniform({2, 3}, rng)});
  check("sub", [](const Inputs& x) { return ops::sub(x[0], x[1]); },
        {uniform({2, 3}, rng), uniform({2, 3}, rng)});
  check("mul", [](const Inputs& x) { return ops::mul(x[0], x[1]); },
        {uniform({2, 3}, rng), uniform({2, 3}, rng)});
  check("scale", [](const Inputs& x) { return ops::scale(x[0], 1.7); }, {uniform({5}, rng)});
  check("sum", [](const Inputs& x) { return ops::sum(x[0]); }, {uniform({2, 4}, rng)});
  check("mean", [](const Inputs& x) { return ops::mean(x[0]); }, {uniform({2, 4}, rng)});
  check("reshape", [](const Inputs& x) { return ops::reshape(x[0], {3, 2}); }, {uniform({2, 3}, rng)});
  check("concat", [](const Inputs& x) { return ops::concat<double>(x); },
        {uniform({1, 2, 2}, rng), uniform({2, 2, 2}, rng)});
  check("slice", [](const Inputs& x) { return ops::slice(x[0], 1, 3); }, {uniform({4, 3}, rng)});
  check("index_select",
        [](const Inputs& x) {
          const std::size_t rows[] = {2, 0, 2};
          return ops::index_select(x[0], rows);
        },
        {uniform({3, 2}, rng)});
  check("conv2d",
        [](const Inputs& x) { return ops::conv2d(x[0], x[1], x[2], 2, 1); },
        {uniform({2, 2, 5, 5}, rng), uniform({3, 2, 3, 3}, rng), uniform({3}, rng)});
  check("conv_transpose2d",
        [](const Inputs& x) { return ops::conv_transpose2d(x[0], x[1], x[2], 2, 1); },
        {uniform({2, 2, 3, 3}, rng), uniform({2, 3, 4, 4}, rng), uniform({3}, rng)});
  check("instance_norm", [](const Inputs& x) { return ops::instance_norm(x[0], 1e-5); },
        {uniform({2, 2, 3, 3}, rng)});
  check("pad_replicate", [](const Inputs& x) { return ops::pad_replicate(x[0], 2); },
        {uniform({1, 2, 3, 3}, rng)});
  check("crop", [](const Inputs& x) { return ops::crop(x[0], 1, 2, 2, 2); }, {uniform({1, 2, 4, 5}, rng)});
  check("max_pool2d", [](const Inputs& x) { return ops::max_pool2d(x[0], 2); }, {spaced({1, 2, 4, 4}, rng)});
  check("horizontal_flip", [](const Inputs& x) { return ops::horizontal_flip(x[0]); },
        {uniform({1, 2, 3, 3}, rng)});
  check("resize_bilinear",
        [](const Inputs& x) { return ops::resize(x[0], 7, 5, ops::ResizeMode::bilinear); },
        {uniform({1, 2, 4, 3}, rng)});
  check("resize_nearest",
        [](const Inputs& x) { return ops::resize(x[0], 6, 2, ops::ResizeMode::nearest); },
        {uniform({1, 2, 3, 4}, rng)});
  check("linear", [](const Inputs& x) { return ops::linear(x[0], x[1], x[2]); },
        {uniform({3, 4}, rng), uniform({2, 4}, rng), uniform({2}, rng)});
  check("relu", [](const Inputs& x) { return ops::activation(x[0], Activation::relu()); },
        {off_kink({2, 5}, rng)});
  check("leaky_relu", [](const Inputs& x) { return ops::activation(x[0], Activation::leaky(0.2)); },
        {off_kink({2, 5}, rng)});
  check("sigmoid", [](const Inputs& x) { return ops::activation(x[0], Activation::sigmoid()); },
        {uniform({2, 5}, rng, -3, 3)});
  check("tanh", [](const Inputs& x) { return ops::activation(x[0], Activation::tanh()); },
        {uniform({2, 5}, rng, -3, 3)});
  check("mse_loss", [](const Inputs& x) { return ops::mse_loss(x[0], x[1]); },
        {uniform({2, 3}, rng), uniform({2, 3}, rng)});
  {
    auto target = uniform({2, 3}, rng);
    auto pred = off_kink({2, 3}, rng);
    check("l1_loss", [target](const Inputs& x) { return ops::l1_loss(x[0], target); }, {ops::add(pred, target)});
  }
  {
    auto target = uniform({2, 3}, rng, 0, 1);
    check("bce_loss", [target](const Inputs& x) { return ops::bce_loss(x[0], target); },
          {uniform({2, 3}, rng, 0.1, 0.9)});
  }
  check("softmax_cross_entropy",
        [](const Inputs& x) {
          const int labels[] = {2, 0, 1};
          return ops::softmax_cross_entropy<double>(x[0], labels);
        },
        {uniform({3, 4}, rng, -2, 2)});
  {
    auto target = ops::softmax_rows(uniform({3, 4}, rng, -2, 2));
    check("soft_cross_entropy", [target](const Inputs& x) { return ops::soft_cross_entropy(x[0], target); },
          {uniform({3, 4}, rng, -2, 2)});
  }
  {
    const auto mask = masking::grid_mask(2, 3, 4, 4, rng);
    check("mix_features", [mask](const Inputs& x) { return networks::mix_features(x[0], mask); },
          {uniform({3, 2, 4, 4}, rng)});
  }
  check("laplacian_pyramid",
        [](const Inputs& x) {
          const auto levels = laplacian_pyramid(x[0], 2);
          std::vector<Tensor<double>> flat;
          for (const auto& l : levels) flat.push_back(ops::reshape(l, {l.size()}));
          return ops::concat<double>(flat);
        },
        {uniform({1, 2, 8, 8}, rng)});

  if (composed) {
    networks::GeneratorConfig gc;
    gc.base_channels = 4;
    gc.n_down = 1;
    gc.n_res_enc = 1;
    gc.n_res_dec = 1;
    networks::DiscriminatorConfig dc;
    dc.base_channels = 4;
    RngStream init = rng.split("micro");
    networks::Generator<double> gen(gc, init);
    networks::Discriminator<double> disc(dc, init);
    const auto images = uniform({2, 3, 8, 8}, rng);
    const std::vector<masking::MixingMask> masks{masking::grid_mask(2, 2, gen.feature_size(8), gen.feature_size(8), rng)};
    const std::vector<std::size_t> rows{0, 1};
    auto params = networks::tensors_of(gen.parameters());
    out.push_back(gradcheck(
        "generator_forward",
        [&](const Inputs&) { return gen.generate(images, masks); }, params, 1e-3, seed, 1e-4, 64));
    out.push_back(gradcheck(
        "generator_objective",
        [&](const Inputs&) {
          return generator_losses(gen, disc, images, 2, masks, rows, 3, LossWeights{}).total;
        },
        params, 1e-3, seed, 1e-4, 64));
  }
  return out;
}

}  // namespace hydramix::training
