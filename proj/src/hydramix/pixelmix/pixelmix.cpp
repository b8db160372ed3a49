#include "hydramix/pixelmix/pixelmix.hpp"

#include <string>

namespace hydramix::pixelmix {

using numerics::ContractError;
using numerics::DimensionError;

namespace {

std::vector<double> one_hot_label(int y, std::size_t num_classes) {
  if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
    throw ContractError("label " + std::to_string(y) + " outside [0, " +
                        std::to_string(num_classes) + ")");
  }
  std::vector<double> w(num_classes, 0.0);
  w[static_cast<std::size_t>(y)] = 1.0;
  return w;
}

}  // namespace

MixedSample mixup_with_lambda(const Tensor<float>& x1, const Tensor<float>& x2, int y1, int y2,
                              std::size_t num_classes, double lambda) {
  if (x1.shape() != x2.shape()) {
    throw DimensionError("mixup: image shapes " + numerics::shape_str(x1.shape()) + " and " +
                         numerics::shape_str(x2.shape()) + " differ");
  }
  if (!(lambda >= 0 && lambda <= 1)) throw ContractError("mixup: lambda must lie in [0, 1]");
  const float a = static_cast<float>(lambda), b = static_cast<float>(1.0 - lambda);
  std::vector<float> out(x1.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x1[i] + b * x2[i];
  MixedSample s{Tensor<float>(x1.shape(), std::move(out)), one_hot_label(y1, num_classes)};
  const auto second = one_hot_label(y2, num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    s.label_weights[k] = lambda * s.label_weights[k] + (1.0 - lambda) * second[k];
  }
  return s;
}

MixedSample mixup(const Tensor<float>& x1, const Tensor<float>& x2, int y1, int y2,
                  std::size_t num_classes, double beta_alpha, RngStream& rng) {
  if (!(beta_alpha > 0)) throw ContractError("mixup: beta_alpha must be positive");
  return mixup_with_lambda(x1, x2, y1, y2, num_classes, rng.beta(beta_alpha, beta_alpha));
}

MixedSample mixup_n_with_weights(const Tensor<float>& images, std::span<const int> labels,
                                 std::size_t num_classes, std::span<const double> weights) {
  if (images.rank() != 4) throw DimensionError("mixup_n: images must be N x C x H x W");
  const std::size_t n = images.dim(0);
  if (n < 2) throw ContractError("mixup_n: needs at least two images");
  if (labels.size() != n || weights.size() != n) {
    throw DimensionError("mixup_n: " + std::to_string(n) + " images but " +
                         std::to_string(labels.size()) + " labels and " +
                         std::to_string(weights.size()) + " weights");
  }
  const std::size_t plane = images.size() / n;
  std::vector<float> out(plane, 0.0f);
  std::vector<double> label_weights(num_classes, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const float w = static_cast<float>(weights[i]);
    for (std::size_t p = 0; p < plane; ++p) out[p] += w * images[i * plane + p];
    const auto y = one_hot_label(labels[i], num_classes);
    for (std::size_t k = 0; k < num_classes; ++k) label_weights[k] += weights[i] * y[k];
  }
  return {Tensor<float>({images.dim(1), images.dim(2), images.dim(3)}, std::move(out)),
          std::move(label_weights)};
}

MixedSample mixup_n(const Tensor<float>& images, std::span<const int> labels,
                    std::size_t num_classes, double dirichlet_alpha, RngStream& rng) {
  if (!(dirichlet_alpha > 0)) throw ContractError("mixup_n: dirichlet_alpha must be positive");
  const auto w = rng.dirichlet(images.dim(0), dirichlet_alpha);
  return mixup_n_with_weights(images, labels, num_classes, w);
}

Tensor<float> mask_mix_pixels(const Tensor<float>& images, const masking::MixingMask& mask) {
  if (images.rank() != 4) throw DimensionError("mask_mix_pixels: images must be N x C x H x W");
  const std::size_t n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  if (mask.n_sources != n || mask.height != h || mask.width != w) {
    throw DimensionError("mask_mix_pixels: mask " + std::to_string(mask.n_sources) + "x" +
                         std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                         " does not fit images " + numerics::shape_str(images.shape()));
  }
  masking::validate(mask);
  std::vector<float> out(c * h * w);
  const auto src = images.values();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t pos = 0; pos < h * w; ++pos) {
      const std::size_t i = mask.assignment[pos];
      out[ch * h * w + pos] = src[(i * c + ch) * h * w + pos];
    }
  }
  return Tensor<float>({c, h, w}, std::move(out));
}

}  // namespace hydramix::pixelmix
