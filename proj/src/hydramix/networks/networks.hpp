#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hydramix/masking/masking.hpp"
#include "hydramix/masking/rng.hpp"
#include "hydramix/numerics/ops.hpp"

namespace hydramix::networks {

using numerics::Tensor;

/// Configuration problems detected before any computation runs.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GeneratorConfig {
  std::size_t in_channels = 3;
  std::size_t base_channels = 16;
  std::size_t n_down = 2;
  std::size_t n_res_enc = 2;  // residual blocks before mixing
  std::size_t n_res_dec = 2;  // residual blocks after mixing
  std::size_t gen_image_size = 0;  // 0: operate at dataset resolution
  double norm_eps = 1e-5;

  std::size_t feature_channels() const { return base_channels << n_down; }
  void validate() const;
};

struct DiscriminatorConfig {
  std::size_t in_channels = 3;
  std::size_t base_channels = 16;
  double slope = 0.2;
  bool normalize_first = false;
  double norm_eps = 1e-5;

  /// Smallest square input that still yields a 1x1 patch map.
  static constexpr std::size_t kMinInput = 8;
  void validate() const;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);
void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParameterList = std::vector<NamedParameter<T>>;

template <typename T>
struct ConvLayer {
  Tensor<T> weight;
  Tensor<T> bias;
  int stride = 1;
  int padding = 0;
  bool transposed = false;

  Tensor<T> operator()(const Tensor<T>& x) const;
};

/// F_mix[b, c, h, w] = sum_i F[i, c, h, w] * M_b[i, h, w], one output row per mask.
/// With one-hot masks this is a per-position gather; it is linear in F.
template <typename T>
Tensor<T> mix_features(const Tensor<T>& features, std::span<const masking::MixingMask> masks);

template <typename T>
Tensor<T> mix_features(const Tensor<T>& features, const masking::MixingMask& mask) {
  return mix_features(features, std::span<const masking::MixingMask>(&mask, 1));
}

/// Encoder -> feature mixing -> decoder.
template <typename T>
class Generator {
 public:
  Generator(const GeneratorConfig& config, RngStream& init);

  const GeneratorConfig& config() const { return config_; }

  /// Side length the networks run at for dataset images of `image_size`.
  std::size_t operating_size(std::size_t image_size) const;
  std::size_t feature_size(std::size_t image_size) const {
    return operating_size(image_size) >> config_.n_down;
  }

  /// N x C x H x W at operating resolution -> N x C_f x H' x W'.
  Tensor<T> encode(const Tensor<T>& images) const;
  /// B x C_f x H' x W' -> B x C x H x W in [-1, 1].
  Tensor<T> decode(const Tensor<T>& features) const;

  /// Bilinear lift of dataset images to the operating resolution (identity when equal).
  Tensor<T> lift(const Tensor<T>& images) const;
  /// Bilinear return to dataset resolution (identity when equal).
  Tensor<T> lower(const Tensor<T>& images, std::size_t height, std::size_t width) const;

  /// Dec(Mix(Enc(I), M)) with lifting; images are N x C x H x W, masks are at
  /// feature resolution. Returns one image per mask.
  Tensor<T> generate(const Tensor<T>& images, std::span<const masking::MixingMask> masks) const;
  Tensor<T> generate(const Tensor<T>& images, const masking::MixingMask& mask) const {
    return generate(images, std::span<const masking::MixingMask>(&mask, 1));
  }

  ParameterList<T>& parameters() { return params_; }
  const ParameterList<T>& parameters() const { return params_; }

 private:
  struct Residual {
    ConvLayer<T> first, second;
  };
  Tensor<T> block(const ConvLayer<T>& conv, const Tensor<T>& x) const;
  Tensor<T> residual(const Residual& r, const Tensor<T>& x) const;

  GeneratorConfig config_;
  ConvLayer<T> stem_;
  std::vector<ConvLayer<T>> down_;
  std::vector<Residual> enc_res_;
  std::vector<Residual> dec_res_;
  std::vector<ConvLayer<T>> up_;
  ConvLayer<T> project_;
  ParameterList<T> params_;
};

/// Patch discriminator emitting per-patch real probabilities. Instance
/// normalization is skipped on maps with a single spatial position.
template <typename T>
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& config, RngStream& init);

  const DiscriminatorConfig& config() const { return config_; }

  /// N x C x H x W -> N x 1 x H/8 x W/8 probabilities in (0, 1).
  Tensor<T> operator()(const Tensor<T>& images) const;

  ParameterList<T>& parameters() { return params_; }
  const ParameterList<T>& parameters() const { return params_; }

 private:
  DiscriminatorConfig config_;
  std::vector<ConvLayer<T>> blocks_;
  ConvLayer<T> output_;
  ParameterList<T> params_;
};

/// Plain tensors of a parameter list, in order.
template <typename T>
std::vector<Tensor<T>> tensors_of(const ParameterList<T>& params);

/// Copies values from `source` into `target` by name; shapes must match.
template <typename T, typename U>
void assign_parameters(ParameterList<T>& target, const ParameterList<U>& source);

}  // namespace hydramix::networks
