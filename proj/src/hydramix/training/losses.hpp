#pragma once

#include <span>
#include <vector>

#include "json.hpp"

#include "hydramix/masking/masking.hpp"
#include "hydramix/networks/networks.hpp"

namespace hydramix::training {

using numerics::Tensor;

struct LossWeights {
  double rec = 1000.0;
  double per = 1.0;
  double gdisc = 1.0;
};

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t max_steps = 0;  // 0: epochs * steps_per_epoch
  double lr = 2e-4;
  double lr_decay = 0.2;
  std::vector<std::size_t> decay_epochs{60, 120, 160};
  double beta1 = 0.5;
  double beta2 = 0.999;
  double weight_decay = 5e-4;
  std::size_t groups_per_step = 1;
  std::size_t n_mix = 4;
  std::size_t pyramid_levels = 3;
  LossWeights weights;
  std::size_t perceptual_images = 2;
  double p_select = 0.5;
  double seg_noise = 0.0;
  std::size_t checkpoint_every = 0;  // in steps; 0 disables intermediate checkpoints
  std::uint64_t seed = 0;

  void validate() const;
  /// Steps making up one epoch for a dataset of `dataset_size` images.
  std::size_t steps_per_epoch(std::size_t dataset_size) const;
  std::size_t total_steps(std::size_t dataset_size) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Base lr decayed by lr_decay once for every decay epoch <= epoch.
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

/// Normalized 5x5 binomial kernel [1,4,6,4,1] x [1,4,6,4,1] / 256.
template <typename T>
Tensor<T> binomial_kernel();

/// Blur with the binomial kernel and keep every second pixel (replicate border).
template <typename T>
Tensor<T> pyramid_down(const Tensor<T>& x);

/// Zero-insertion upsampling to out_h x out_w filtered by 4 x the binomial kernel.
template <typename T>
Tensor<T> pyramid_up(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

/// Band-pass levels L^1..L^levels of an N x C x H x W batch.
template <typename T>
std::vector<Tensor<T>> laplacian_pyramid(const Tensor<T>& x, std::size_t levels);

/// Sum over levels of the mean absolute difference between pyramids.
template <typename T>
Tensor<T> pyramid_l1(const Tensor<T>& generated, const Tensor<T>& original, std::size_t levels);

/// MSE between every image and its reconstruction through the generator.
template <typename T>
Tensor<T> loss_reconstruction(const networks::Generator<T>& gen, const Tensor<T>& images);

/// Pyramid L1 between reconstructions and originals on `count` images drawn
/// without replacement (all images when fewer are available).
template <typename T>
Tensor<T> loss_perceptual(const networks::Generator<T>& gen, const Tensor<T>& images,
                          std::size_t levels, RngStream& rng, std::size_t count = 2);

enum class AdversarialSide { generator, discriminator };

template <typename T>
Tensor<T> loss_adversarial(const Tensor<T>& d_real, const Tensor<T>& d_fake, AdversarialSide side);

template <typename T>
Tensor<T> total_generator_loss(const Tensor<T>& rec, const Tensor<T>& per, const Tensor<T>& gdisc,
                               const LossWeights& weights);

template <typename T>
struct GeneratorLossTerms {
  Tensor<T> rec;
  Tensor<T> per;
  Tensor<T> gdisc;
  Tensor<T> total;
  Tensor<T> mixed;  // one generated image per group, at dataset resolution
};

/// Generator objective for one step. `images` holds G groups of n_mix images
/// (rows g*n_mix .. (g+1)*n_mix-1), `mix_masks` one feature-resolution mask per
/// group, and `perceptual_rows` the rows entering the perceptual term.
/// Encodes and decodes every image once.
template <typename T>
GeneratorLossTerms<T> generator_losses(const networks::Generator<T>& gen,
                                       const networks::Discriminator<T>& disc,
                                       const Tensor<T>& images, std::size_t n_mix,
                                       std::span<const masking::MixingMask> mix_masks,
                                       std::span<const std::size_t> perceptual_rows,
                                       std::size_t levels, const LossWeights& weights);

}  // namespace hydramix::training
