#include "hydramix/io/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace hydramix::io {

using numerics::ContractError;

void SyntheticSpec::validate() const {
  if (classes < 2) throw ContractError("synthetic: classes must be >= 2");
  if (per_class == 0) throw ContractError("synthetic: per_class must be >= 1");
  if (size < 8) throw ContractError("synthetic: size must be >= 8");
  if (channels != 1 && channels != 3) throw ContractError("synthetic: channels must be 1 or 3");
  if (parts == 0 || parts > 4) throw ContractError("synthetic: parts must lie in [1, 4]");
  if (noise < 0) throw ContractError("synthetic: noise must be >= 0");
}

namespace {

enum Shape { disk, square, diamond };
enum Texture { solid, h_stripes, v_stripes, checker, diagonal, dots };

bool inside(Shape shape, double dx, double dy, double r) {
  switch (shape) {
    case disk: return dx * dx + dy * dy <= r * r;
    case square: return std::abs(dx) <= r * 0.85 && std::abs(dy) <= r * 0.85;
    case diamond: return std::abs(dx) + std::abs(dy) <= r * 1.2;
  }
  return false;
}

bool texture_on(Texture texture, std::ptrdiff_t x, std::ptrdiff_t y) {
  switch (texture) {
    case solid: return true;
    case h_stripes: return (y / 2) % 2 == 0;
    case v_stripes: return (x / 2) % 2 == 0;
    case checker: return ((x / 2) + (y / 2)) % 2 == 0;
    case diagonal: return ((x + y) / 2) % 2 == 0;
    case dots: return x % 3 != 0 || y % 3 != 0;
  }
  return true;
}

}  // namespace

classifier::LabeledDataset make_synthetic(const SyntheticSpec& spec, const std::string& split) {
  spec.validate();
  RngStream rng = RngStream(spec.seed).split("synthetic").split(split);
  const std::size_t s = spec.size, c = spec.channels, half = s / 2;
  const std::size_t types = 2 * spec.classes;

  classifier::LabeledDataset data;
  data.split = split;
  for (std::size_t k = 0; k < spec.classes; ++k) data.class_names.push_back("class" + std::to_string(k));
  std::vector<float> values;
  for (std::size_t k = 0; k < spec.classes; ++k) {
    const std::size_t pool[3] = {2 * k, 2 * k + 1, (2 * k + 2) % types};
    for (std::size_t n = 0; n < spec.per_class; ++n) {
      std::vector<float> img(c * s * s);
      double base[3];
      for (std::size_t ch = 0; ch < c; ++ch) base[ch] = 0.6 * (2.0 * rng.uniform() - 1.0);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < s * s; ++p) img[ch * s * s + p] = static_cast<float>(base[ch] + spec.noise * rng.normal());

      const auto quadrants = rng.choose(4, spec.parts);
      for (std::size_t q : quadrants) {
        const std::size_t type = pool[rng.below(spec.shared_parts ? 3 : 2)];
        const auto shape = static_cast<Shape>(type % 3);
        const auto texture = static_cast<Texture>(type % 6);
        const double r = 0.18 * static_cast<double>(s) + 0.06 * static_cast<double>(s) * rng.uniform();
        const double cx = static_cast<double>((q % 2) * half) + 0.5 * static_cast<double>(half) + 2.0 * (rng.uniform() - 0.5);
        const double cy = static_cast<double>((q / 2) * half) + 0.5 * static_cast<double>(half) + 2.0 * (rng.uniform() - 0.5);
        double bright[3], dark[3];
        for (std::size_t ch = 0; ch < c; ++ch) {
          bright[ch] = 0.3 + 0.7 * rng.uniform();
          dark[ch] = -0.3 - 0.7 * rng.uniform();
        }
        for (std::size_t y = 0; y < s; ++y) {
          for (std::size_t x = 0; x < s; ++x) {
            const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
            if (!inside(shape, dx, dy, r)) continue;
            const bool on = texture_on(texture, static_cast<std::ptrdiff_t>(x), static_cast<std::ptrdiff_t>(y));
            for (std::size_t ch = 0; ch < c; ++ch) {
              img[(ch * s + y) * s + x] = static_cast<float>((on ? bright[ch] : dark[ch]) + 0.5 * spec.noise * rng.normal());
            }
          }
        }
      }
      for (auto& v : img) v = std::clamp(v, -1.0f, 1.0f);
      values.insert(values.end(), img.begin(), img.end());
      data.labels.push_back(static_cast<int>(k));
      data.ids.push_back(split + "_" + std::to_string(k) + "_" + std::to_string(n));
    }
  }
  data.images = numerics::Tensor<float>({data.labels.size(), c, s, s}, std::move(values));
  data.rebuild_index();
  return data;
}

}  // namespace hydramix::io
