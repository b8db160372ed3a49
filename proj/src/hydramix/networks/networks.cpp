#include "hydramix/networks/networks.hpp"

#include <cmath>
#include <map>

namespace hydramix::networks {

using numerics::Activation;
using numerics::DimensionError;
using numerics::ResizeMode;

void GeneratorConfig::validate() const {
  if (in_channels == 0) throw ConfigError("generator: in_channels must be >= 1");
  if (base_channels == 0) throw ConfigError("generator: base_channels must be >= 1");
  if (n_down < 1) throw ConfigError("generator: n_down must be >= 1");
  if (n_down > 6) throw ConfigError("generator: n_down must be <= 6");
  if (!(norm_eps > 0)) throw ConfigError("generator: norm_eps must be positive");
  if (gen_image_size != 0 && gen_image_size % (std::size_t{1} << n_down) != 0) {
    throw ConfigError("generator: gen_image_size " + std::to_string(gen_image_size) +
                      " is not divisible by 2^n_down");
  }
}

void DiscriminatorConfig::validate() const {
  if (in_channels == 0 || base_channels == 0) {
    throw ConfigError("discriminator: channel counts must be >= 1");
  }
  if (!(slope > 0 && slope < 1)) throw ConfigError("discriminator: slope must lie in (0, 1)");
  if (!(norm_eps > 0)) throw ConfigError("discriminator: norm_eps must be positive");
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"in_channels", c.in_channels},     {"base_channels", c.base_channels},
       {"n_down", c.n_down},               {"n_res_enc", c.n_res_enc},
       {"n_res_dec", c.n_res_dec},         {"gen_image_size", c.gen_image_size},
       {"norm_eps", c.norm_eps}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  c = GeneratorConfig{};
  for (auto& [key, value] : j.items()) {
    if (key == "in_channels") c.in_channels = value.get<std::size_t>();
    else if (key == "base_channels") c.base_channels = value.get<std::size_t>();
    else if (key == "n_down") c.n_down = value.get<std::size_t>();
    else if (key == "n_res_enc") c.n_res_enc = value.get<std::size_t>();
    else if (key == "n_res_dec") c.n_res_dec = value.get<std::size_t>();
    else if (key == "gen_image_size") c.gen_image_size = value.get<std::size_t>();
    else if (key == "norm_eps") c.norm_eps = value.get<double>();
    else throw ConfigError("generator config: unknown key '" + key + "'");
  }
  c.validate();
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
  j = {{"in_channels", c.in_channels}, {"base_channels", c.base_channels},
       {"slope", c.slope},             {"normalize_first", c.normalize_first},
       {"norm_eps", c.norm_eps}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  c = DiscriminatorConfig{};
  for (auto& [key, value] : j.items()) {
    if (key == "in_channels") c.in_channels = value.get<std::size_t>();
    else if (key == "base_channels") c.base_channels = value.get<std::size_t>();
    else if (key == "slope") c.slope = value.get<double>();
    else if (key == "normalize_first") c.normalize_first = value.get<bool>();
    else if (key == "norm_eps") c.norm_eps = value.get<double>();
    else throw ConfigError("discriminator config: unknown key '" + key + "'");
  }
  c.validate();
}

namespace {

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
template <typename T>
ConvLayer<T> make_conv(ParameterList<T>& params, const std::string& name, std::size_t in,
                       std::size_t out, std::size_t k, int stride, int padding, bool transposed,
                       RngStream& rng) {
  const double fan_in = static_cast<double>((transposed ? out : in) * k * k);
  const double bound = 1.0 / std::sqrt(fan_in);
  auto draw = [&](numerics::Shape shape) {
    std::vector<T> v(numerics::shape_numel(shape));
    for (auto& x : v) x = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
    Tensor<T> t(std::move(shape), std::move(v));
    t.set_requires_grad(true);
    return t;
  };
  ConvLayer<T> layer;
  layer.weight = transposed ? draw({in, out, k, k}) : draw({out, in, k, k});
  layer.bias = draw({out});
  layer.stride = stride;
  layer.padding = padding;
  layer.transposed = transposed;
  params.push_back({name + ".weight", layer.weight});
  params.push_back({name + ".bias", layer.bias});
  return layer;
}

}  // namespace

template <typename T>
Tensor<T> ConvLayer<T>::operator()(const Tensor<T>& x) const {
  return transposed ? numerics::conv_transpose2d(x, weight, bias, stride, padding)
                    : numerics::conv2d(x, weight, bias, stride, padding);
}

template <typename T>
Tensor<T> mix_features(const Tensor<T>& features, std::span<const masking::MixingMask> masks) {
  if (features.rank() != 4) {
    throw DimensionError("mix_features: features must be N x C x H x W, got " +
                         numerics::shape_str(features.shape()));
  }
  if (masks.empty()) throw numerics::ContractError("mix_features: no masks");
  const std::size_t n = features.dim(0), c = features.dim(1), h = features.dim(2),
                    w = features.dim(3);
  for (const auto& m : masks) {
    if (m.n_sources != n || m.height != h || m.width != w) {
      throw DimensionError("mix_features: mask " + std::to_string(m.n_sources) + "x" +
                           std::to_string(m.height) + "x" + std::to_string(m.width) +
                           " does not match features (axes 0,2,3) " +
                           numerics::shape_str(features.shape()));
    }
    masking::validate(m);
  }
  const std::size_t plane = h * w;
  Tensor<T> out({masks.size(), c, h, w});
  auto f = features.values();
  auto y = out.mutable_values();
  for (std::size_t b = 0; b < masks.size(); ++b) {
    const auto& assign = masks[b].assignment;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < plane; ++p)
        y[(b * c + ch) * plane + p] = f[(assign[p] * c + ch) * plane + p];
  }
  if (numerics::needs_grad<T>({&features})) {
    std::vector<masking::MixingMask> kept(masks.begin(), masks.end());
    numerics::record_op<T>("mix_features", {features}, out,
                           [features, out, kept = std::move(kept), c, plane]() {
                             auto g = out.grad();
                             auto fg = features.mutable_grad();
                             for (std::size_t b = 0; b < kept.size(); ++b) {
                               const auto& assign = kept[b].assignment;
                               for (std::size_t ch = 0; ch < c; ++ch)
                                 for (std::size_t p = 0; p < plane; ++p)
                                   fg[(assign[p] * c + ch) * plane + p] +=
                                       g[(b * c + ch) * plane + p];
                             }
                           });
  }
  return out;
}

// Generator --------------------------------------------------------------------

template <typename T>
Generator<T>::Generator(const GeneratorConfig& config, RngStream& init) : config_(config) {
  config_.validate();
  const std::size_t b = config_.base_channels;
  stem_ = make_conv<T>(params_, "enc.stem", config_.in_channels, b, 3, 1, 1, false, init);
  std::size_t ch = b;
  for (std::size_t i = 0; i < config_.n_down; ++i) {
    down_.push_back(make_conv<T>(params_, "enc.down" + std::to_string(i), ch, ch * 2, 3, 2, 1,
                                 false, init));
    ch *= 2;
  }
  auto make_res = [&](const std::string& name) {
    Residual r;
    r.first = make_conv<T>(params_, name + ".conv1", ch, ch, 3, 1, 1, false, init);
    r.second = make_conv<T>(params_, name + ".conv2", ch, ch, 3, 1, 1, false, init);
    return r;
  };
  for (std::size_t i = 0; i < config_.n_res_enc; ++i) enc_res_.push_back(make_res("enc.res" + std::to_string(i)));
  for (std::size_t i = 0; i < config_.n_res_dec; ++i) dec_res_.push_back(make_res("dec.res" + std::to_string(i)));
  for (std::size_t i = 0; i < config_.n_down; ++i) {
    up_.push_back(make_conv<T>(params_, "dec.up" + std::to_string(i), ch, ch / 2, 4, 2, 1, true,
                               init));
    ch /= 2;
  }
  project_ = make_conv<T>(params_, "dec.project", ch, config_.in_channels, 3, 1, 1, false, init);
}

template <typename T>
std::size_t Generator<T>::operating_size(std::size_t image_size) const {
  return config_.gen_image_size == 0 ? image_size : config_.gen_image_size;
}

template <typename T>
Tensor<T> Generator<T>::block(const ConvLayer<T>& conv, const Tensor<T>& x) const {
  return numerics::activation(numerics::instance_norm(conv(x), static_cast<T>(config_.norm_eps)),
                              Activation::relu());
}

template <typename T>
Tensor<T> Generator<T>::residual(const Residual& r, const Tensor<T>& x) const {
  const T eps = static_cast<T>(config_.norm_eps);
  auto y = block(r.first, x);
  y = numerics::instance_norm(r.second(y), eps);
  return numerics::activation(numerics::add(y, x), Activation::relu());
}

template <typename T>
Tensor<T> Generator<T>::encode(const Tensor<T>& images) const {
  if (images.rank() != 4 || images.dim(1) != config_.in_channels) {
    throw DimensionError("encode: expected N x " + std::to_string(config_.in_channels) +
                         " x H x W, got " + numerics::shape_str(images.shape()));
  }
  const std::size_t div = std::size_t{1} << config_.n_down;
  if (images.dim(2) % div != 0 || images.dim(3) % div != 0) {
    throw ConfigError("encode: spatial size " + std::to_string(images.dim(2)) + "x" +
                      std::to_string(images.dim(3)) + " not divisible by 2^n_down = " +
                      std::to_string(div));
  }
  auto x = block(stem_, images);
  for (const auto& d : down_) x = block(d, x);
  for (const auto& r : enc_res_) x = residual(r, x);
  return x;
}

template <typename T>
Tensor<T> Generator<T>::decode(const Tensor<T>& features) const {
  if (features.rank() != 4 || features.dim(1) != config_.feature_channels()) {
    throw DimensionError("decode: expected B x " + std::to_string(config_.feature_channels()) +
                         " x H' x W', got " + numerics::shape_str(features.shape()));
  }
  Tensor<T> x = features;
  for (const auto& r : dec_res_) x = residual(r, x);
  for (const auto& u : up_) x = block(u, x);
  return numerics::activation(project_(x), Activation::tanh());
}

template <typename T>
Tensor<T> Generator<T>::lift(const Tensor<T>& images) const {
  const std::size_t size = operating_size(images.dim(2));
  if (size == images.dim(2) && size == images.dim(3)) return images;
  return numerics::resize(images, size, size, ResizeMode::bilinear);
}

template <typename T>
Tensor<T> Generator<T>::lower(const Tensor<T>& images, std::size_t height,
                              std::size_t width) const {
  if (images.dim(2) == height && images.dim(3) == width) return images;
  return numerics::resize(images, height, width, ResizeMode::bilinear);
}

template <typename T>
Tensor<T> Generator<T>::generate(const Tensor<T>& images,
                                 std::span<const masking::MixingMask> masks) const {
  const auto features = encode(lift(images));
  return lower(decode(mix_features(features, masks)), images.dim(2), images.dim(3));
}

// Discriminator ----------------------------------------------------------------

template <typename T>
Discriminator<T>::Discriminator(const DiscriminatorConfig& config, RngStream& init)
    : config_(config) {
  config_.validate();
  std::size_t ch = config_.base_channels;
  blocks_.push_back(make_conv<T>(params_, "disc.block0", config_.in_channels, ch, 3, 1, 1, false, init));
  for (int i = 1; i < 4; ++i) {
    blocks_.push_back(make_conv<T>(params_, "disc.block" + std::to_string(i), ch, ch * 2, 4, 2, 1,
                                   false, init));
    ch *= 2;
  }
  output_ = make_conv<T>(params_, "disc.output", ch, 1, 3, 1, 1, false, init);
}

template <typename T>
Tensor<T> Discriminator<T>::operator()(const Tensor<T>& images) const {
  if (images.rank() != 4 || images.dim(1) != config_.in_channels) {
    throw DimensionError("discriminate: expected N x " + std::to_string(config_.in_channels) +
                         " x H x W, got " + numerics::shape_str(images.shape()));
  }
  if (images.dim(2) < DiscriminatorConfig::kMinInput || images.dim(3) < DiscriminatorConfig::kMinInput) {
    throw ConfigError("discriminate: input " + std::to_string(images.dim(2)) + "x" +
                      std::to_string(images.dim(3)) + " smaller than the 8x8 minimum");
  }
  const T eps = static_cast<T>(config_.norm_eps);
  Tensor<T> x = images;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    x = blocks_[i](x);
    const bool single_position = x.dim(2) * x.dim(3) == 1;
    if ((i > 0 || config_.normalize_first) && !single_position) x = numerics::instance_norm(x, eps);
    x = numerics::activation(x, Activation::leaky(config_.slope));
  }
  return numerics::activation(output_(x), Activation::sigmoid());
}

template <typename T>
std::vector<Tensor<T>> tensors_of(const ParameterList<T>& params) {
  std::vector<Tensor<T>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

template <typename T, typename U>
void assign_parameters(ParameterList<T>& target, const ParameterList<U>& source) {
  std::map<std::string, const Tensor<U>*> by_name;
  for (const auto& p : source) by_name[p.name] = &p.tensor;
  for (auto& p : target) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ConfigError("parameter '" + p.name + "' missing from source");
    if (it->second->shape() != p.tensor.shape()) {
      throw DimensionError("parameter '" + p.name + "': shape " +
                           numerics::shape_str(it->second->shape()) + " vs " +
                           numerics::shape_str(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_values();
    auto src = it->second->values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src[i]);
  }
}

#define HM_INSTANTIATE(T)                                                                      \
  template struct ConvLayer<T>;                                                                \
  template Tensor<T> mix_features(const Tensor<T>&, std::span<const masking::MixingMask>);     \
  template class Generator<T>;                                                                 \
  template class Discriminator<T>;                                                             \
  template std::vector<Tensor<T>> tensors_of(const ParameterList<T>&);

HM_INSTANTIATE(float)
HM_INSTANTIATE(double)
#undef HM_INSTANTIATE

template void assign_parameters(ParameterList<float>&, const ParameterList<float>&);
template void assign_parameters(ParameterList<float>&, const ParameterList<double>&);
template void assign_parameters(ParameterList<double>&, const ParameterList<float>&);
template void assign_parameters(ParameterList<double>&, const ParameterList<double>&);

}  // namespace hydramix::networks
