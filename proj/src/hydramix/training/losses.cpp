#include "hydramix/training/losses.hpp"

#include <algorithm>
#include <cmath>

namespace hydramix::training {

using networks::ConfigError;
using numerics::DimensionError;

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
  if (!(lr > 0)) throw ConfigError("train: lr must be positive");
  if (!(lr_decay > 0 && lr_decay <= 1)) throw ConfigError("train: lr_decay must lie in (0, 1]");
  if (!std::is_sorted(decay_epochs.begin(), decay_epochs.end()) ||
      std::adjacent_find(decay_epochs.begin(), decay_epochs.end()) != decay_epochs.end()) {
    throw ConfigError("train: decay_epochs must be strictly ascending");
  }
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw ConfigError("train: adam betas must lie in [0, 1)");
  }
  if (weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
  if (groups_per_step == 0) throw ConfigError("train: groups_per_step must be >= 1");
  if (n_mix < 2) throw ConfigError("train: n_mix must be >= 2");
  if (pyramid_levels == 0) throw ConfigError("train: pyramid_levels must be >= 1");
  if (weights.rec < 0 || weights.per < 0 || weights.gdisc < 0) {
    throw ConfigError("train: loss weights must be >= 0");
  }
  if (perceptual_images == 0) throw ConfigError("train: perceptual_images must be >= 1");
  if (!(p_select >= 0 && p_select <= 1)) throw ConfigError("train: p_select must lie in [0, 1]");
  if (!(seg_noise >= 0 && seg_noise <= 1)) throw ConfigError("train: seg_noise must lie in [0, 1]");
}

std::size_t TrainConfig::steps_per_epoch(std::size_t dataset_size) const {
  const std::size_t per_step = groups_per_step * n_mix;
  return std::max<std::size_t>(1, (dataset_size + per_step - 1) / per_step);
}

std::size_t TrainConfig::total_steps(std::size_t dataset_size) const {
  return max_steps != 0 ? max_steps : epochs * steps_per_epoch(dataset_size);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"max_steps", c.max_steps},
       {"lr", c.lr},
       {"lr_decay", c.lr_decay},
       {"decay_epochs", c.decay_epochs},
       {"adam_betas", {c.beta1, c.beta2}},
       {"weight_decay", c.weight_decay},
       {"groups_per_step", c.groups_per_step},
       {"n_mix", c.n_mix},
       {"pyramid_levels", c.pyramid_levels},
       {"alpha_rec", c.weights.rec},
       {"alpha_per", c.weights.per},
       {"alpha_gdisc", c.weights.gdisc},
       {"perceptual_images", c.perceptual_images},
       {"p_select", c.p_select},
       {"seg_noise", c.seg_noise},
       {"checkpoint_every", c.checkpoint_every},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  for (auto& [key, value] : j.items()) {
    if (key == "epochs") c.epochs = value.get<std::size_t>();
    else if (key == "max_steps") c.max_steps = value.get<std::size_t>();
    else if (key == "lr") c.lr = value.get<double>();
    else if (key == "lr_decay") c.lr_decay = value.get<double>();
    else if (key == "decay_epochs") c.decay_epochs = value.get<std::vector<std::size_t>>();
    else if (key == "adam_betas") {
      const auto betas = value.get<std::vector<double>>();
      if (betas.size() != 2) throw ConfigError("train config: adam_betas needs two values");
      c.beta1 = betas[0];
      c.beta2 = betas[1];
    } else if (key == "weight_decay") c.weight_decay = value.get<double>();
    else if (key == "groups_per_step") c.groups_per_step = value.get<std::size_t>();
    else if (key == "n_mix") c.n_mix = value.get<std::size_t>();
    else if (key == "pyramid_levels") c.pyramid_levels = value.get<std::size_t>();
    else if (key == "alpha_rec") c.weights.rec = value.get<double>();
    else if (key == "alpha_per") c.weights.per = value.get<double>();
    else if (key == "alpha_gdisc") c.weights.gdisc = value.get<double>();
    else if (key == "perceptual_images") c.perceptual_images = value.get<std::size_t>();
    else if (key == "p_select") c.p_select = value.get<double>();
    else if (key == "seg_noise") c.seg_noise = value.get<double>();
    else if (key == "checkpoint_every") c.checkpoint_every = value.get<std::size_t>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else throw ConfigError("train config: unknown key '" + key + "'");
  }
  c.validate();
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
  const auto passed = std::count_if(config.decay_epochs.begin(), config.decay_epochs.end(),
                                    [&](std::size_t e) { return e <= epoch; });
  return config.lr * std::pow(config.lr_decay, static_cast<double>(passed));
}

template <typename T>
Tensor<T> binomial_kernel() {
  static constexpr T taps[5] = {1, 4, 6, 4, 1};
  std::vector<T> k(25);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) k[y * 5 + x] = taps[y] * taps[x] / T(256);
  return Tensor<T>({1, 1, 5, 5}, std::move(k));
}

namespace {

template <typename T>
Tensor<T> as_planes(const Tensor<T>& x) {
  return numerics::reshape(x, {x.dim(0) * x.dim(1), 1, x.dim(2), x.dim(3)});
}

}  // namespace

template <typename T>
Tensor<T> pyramid_down(const Tensor<T>& x) {
  if (x.rank() != 4) throw DimensionError("pyramid_down: expected N x C x H x W");
  const auto y = numerics::conv2d(numerics::pad_replicate(as_planes(x), 2), binomial_kernel<T>(),
                                  Tensor<T>(), 2, 0);
  return numerics::reshape(y, {x.dim(0), x.dim(1), y.dim(2), y.dim(3)});
}

template <typename T>
Tensor<T> pyramid_up(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  if (x.rank() != 4) throw DimensionError("pyramid_up: expected N x C x H x W");
  if (out_h > 2 * x.dim(2) || out_w > 2 * x.dim(3)) {
    throw DimensionError("pyramid_up: target exceeds twice the input size");
  }
  const auto kernel = numerics::scale(binomial_kernel<T>(), T(4));
  const auto y = numerics::conv_transpose2d(numerics::pad_replicate(as_planes(x), 1), kernel,
                                            Tensor<T>(), 2, 0);
  return numerics::reshape(numerics::crop(y, 4, 4, out_h, out_w),
                           {x.dim(0), x.dim(1), out_h, out_w});
}

template <typename T>
std::vector<Tensor<T>> laplacian_pyramid(const Tensor<T>& x, std::size_t levels) {
  if (levels == 0) throw ConfigError("laplacian_pyramid: levels must be >= 1");
  if (x.rank() != 4) throw DimensionError("laplacian_pyramid: expected N x C x H x W");
  const std::size_t need = std::size_t{1} << levels;
  if (x.dim(2) < need || x.dim(3) < need) {
    throw ConfigError("laplacian_pyramid: " + std::to_string(levels) + " levels need at least " +
                      std::to_string(need) + "x" + std::to_string(need) + " input, got " +
                      std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)));
  }
  std::vector<Tensor<T>> out;
  Tensor<T> current = x;
  for (std::size_t l = 0; l < levels; ++l) {
    Tensor<T> down = pyramid_down(current);
    out.push_back(numerics::sub(current, pyramid_up(down, current.dim(2), current.dim(3))));
    current = down;
  }
  return out;
}

template <typename T>
Tensor<T> pyramid_l1(const Tensor<T>& generated, const Tensor<T>& original, std::size_t levels) {
  const auto g = laplacian_pyramid(generated, levels);
  const auto o = laplacian_pyramid(original, levels);
  Tensor<T> total = numerics::l1_loss(g[0], o[0]);
  for (std::size_t l = 1; l < levels; ++l) total = numerics::add(total, numerics::l1_loss(g[l], o[l]));
  return total;
}

namespace {

template <typename T>
std::vector<masking::MixingMask> reconstruction_masks(const networks::Generator<T>& gen,
                                                      std::span<const std::size_t> rows,
                                                      std::size_t n, std::size_t h,
                                                      std::size_t w) {
  const std::size_t fh = gen.feature_size(h), fw = gen.feature_size(w);
  std::vector<masking::MixingMask> masks;
  for (std::size_t r : rows) masks.push_back(masking::reconstruction_mask(r, n, fh, fw));
  return masks;
}

}  // namespace

template <typename T>
Tensor<T> loss_reconstruction(const networks::Generator<T>& gen, const Tensor<T>& images) {
  if (images.rank() != 4 || images.dim(0) == 0) {
    throw DimensionError("loss_reconstruction: expected a non-empty N x C x H x W batch");
  }
  std::vector<std::size_t> rows(images.dim(0));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const auto masks = reconstruction_masks(gen, rows, rows.size(), images.dim(2), images.dim(3));
  return numerics::mse_loss(gen.generate(images, masks), images);
}

template <typename T>
Tensor<T> loss_perceptual(const networks::Generator<T>& gen, const Tensor<T>& images,
                          std::size_t levels, RngStream& rng, std::size_t count) {
  const std::size_t n = images.dim(0);
  const auto rows = rng.choose(n, std::min(count, n));
  const auto masks = reconstruction_masks(gen, rows, n, images.dim(2), images.dim(3));
  return pyramid_l1(gen.generate(images, masks), numerics::index_select(images, rows), levels);
}

template <typename T>
Tensor<T> loss_adversarial(const Tensor<T>& d_real, const Tensor<T>& d_fake, AdversarialSide side) {
  const Tensor<T> ones(d_fake.shape(), T(1));
  if (side == AdversarialSide::generator) return numerics::bce_loss(d_fake, ones);
  return numerics::add(numerics::bce_loss(d_real, Tensor<T>(d_real.shape(), T(1))),
                       numerics::bce_loss(d_fake, Tensor<T>(d_fake.shape(), T(0))));
}

template <typename T>
Tensor<T> total_generator_loss(const Tensor<T>& rec, const Tensor<T>& per, const Tensor<T>& gdisc,
                               const LossWeights& weights) {
  return numerics::add(numerics::add(numerics::scale(rec, static_cast<T>(weights.rec)),
                                     numerics::scale(per, static_cast<T>(weights.per))),
                       numerics::scale(gdisc, static_cast<T>(weights.gdisc)));
}

template <typename T>
GeneratorLossTerms<T> generator_losses(const networks::Generator<T>& gen,
                                       const networks::Discriminator<T>& disc,
                                       const Tensor<T>& images, std::size_t n_mix,
                                       std::span<const masking::MixingMask> mix_masks,
                                       std::span<const std::size_t> perceptual_rows,
                                       std::size_t levels, const LossWeights& weights) {
  const std::size_t batch = images.dim(0);
  const std::size_t groups = mix_masks.size();
  if (n_mix == 0 || groups * n_mix != batch) {
    throw DimensionError("generator_losses: " + std::to_string(batch) + " images do not form " +
                         std::to_string(groups) + " groups of " + std::to_string(n_mix));
  }
  const auto features = gen.encode(gen.lift(images));
  std::vector<Tensor<T>> parts{features};
  for (std::size_t g = 0; g < groups; ++g) {
    parts.push_back(
        networks::mix_features(numerics::slice(features, g * n_mix, (g + 1) * n_mix), mix_masks[g]));
  }
  const auto decoded = gen.lower(gen.decode(numerics::concat<T>(parts)), images.dim(2), images.dim(3));
  const auto recon = numerics::slice(decoded, 0, batch);

  GeneratorLossTerms<T> terms;
  terms.mixed = numerics::slice(decoded, batch, batch + groups);
  terms.rec = numerics::mse_loss(recon, images);
  terms.per = pyramid_l1(numerics::index_select(recon, perceptual_rows),
                         numerics::index_select(images, perceptual_rows), levels);
  terms.gdisc = loss_adversarial(Tensor<T>(), disc(terms.mixed), AdversarialSide::generator);
  terms.total = total_generator_loss(terms.rec, terms.per, terms.gdisc, weights);
  return terms;
}

#define HM_INSTANTIATE(T)                                                                        \
  template Tensor<T> binomial_kernel<T>();                                                       \
  template Tensor<T> pyramid_down(const Tensor<T>&);                                             \
  template Tensor<T> pyramid_up(const Tensor<T>&, std::size_t, std::size_t);                     \
  template std::vector<Tensor<T>> laplacian_pyramid(const Tensor<T>&, std::size_t);              \
  template Tensor<T> pyramid_l1(const Tensor<T>&, const Tensor<T>&, std::size_t);                \
  template Tensor<T> loss_reconstruction(const networks::Generator<T>&, const Tensor<T>&);       \
  template Tensor<T> loss_perceptual(const networks::Generator<T>&, const Tensor<T>&,            \
                                     std::size_t, RngStream&, std::size_t);                      \
  template Tensor<T> loss_adversarial(const Tensor<T>&, const Tensor<T>&, AdversarialSide);      \
  template Tensor<T> total_generator_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                          const LossWeights&);                                   \
  template GeneratorLossTerms<T> generator_losses(                                               \
      const networks::Generator<T>&, const networks::Discriminator<T>&, const Tensor<T>&,        \
      std::size_t, std::span<const masking::MixingMask>, std::span<const std::size_t>,           \
      std::size_t, const LossWeights&);

HM_INSTANTIATE(float)
HM_INSTANTIATE(double)
#undef HM_INSTANTIATE

}  // namespace hydramix::training
