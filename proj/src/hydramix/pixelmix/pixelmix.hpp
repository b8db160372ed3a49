#pragma once

#include <span>
#include <vector>

#include "hydramix/masking/masking.hpp"
#include "hydramix/numerics/tensor.hpp"

namespace hydramix::pixelmix {

using numerics::Tensor;

/// A mixed C x H x W image together with its soft label.
struct MixedSample {
  Tensor<float> image;
  std::vector<double> label_weights;  // one entry per class, non-negative, sums to 1
};

/// image = lambda*x1 + (1 - lambda)*x2 with matching label weights.
MixedSample mixup_with_lambda(const Tensor<float>& x1, const Tensor<float>& x2, int y1, int y2,
                              std::size_t num_classes, double lambda);

/// MixUp with lambda ~ Beta(alpha, alpha).
MixedSample mixup(const Tensor<float>& x1, const Tensor<float>& x2, int y1, int y2,
                  std::size_t num_classes, double beta_alpha, RngStream& rng);

/// Convex combination of N images (N x C x H x W) with explicit weights.
MixedSample mixup_n_with_weights(const Tensor<float>& images, std::span<const int> labels,
                                 std::size_t num_classes, std::span<const double> weights);

/// MixUpN with weights ~ Dirichlet(alpha * 1_N).
MixedSample mixup_n(const Tensor<float>& images, std::span<const int> labels,
                    std::size_t num_classes, double dirichlet_alpha, RngStream& rng);

/// out[c, h, w] = images[mask(h, w), c, h, w]; the mask is at pixel resolution.
Tensor<float> mask_mix_pixels(const Tensor<float>& images, const masking::MixingMask& mask);

}  // namespace hydramix::pixelmix
