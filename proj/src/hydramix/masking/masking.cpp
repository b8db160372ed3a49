#include "hydramix/masking/masking.hpp"

#include <map>
#include <string>

namespace hydramix::masking {

using numerics::ContractError;
using numerics::DimensionError;
using segmentation::SegmentationMap;

template <typename T>
numerics::Tensor<T> MixingMask::one_hot() const {
  numerics::Tensor<T> out({n_sources, height, width});
  auto v = out.mutable_values();
  for (std::size_t p = 0; p < assignment.size(); ++p) v[assignment[p] * height * width + p] = T(1);
  return out;
}

template numerics::Tensor<float> MixingMask::one_hot<float>() const;
template numerics::Tensor<double> MixingMask::one_hot<double>() const;

void validate(const MixingMask& mask) {
  if (mask.n_sources == 0) throw ContractError("mixing mask: no sources");
  if (mask.assignment.size() != mask.height * mask.width || mask.assignment.empty()) {
    throw ContractError("mixing mask: assignment size does not match height*width");
  }
  for (std::uint32_t a : mask.assignment) {
    if (a >= mask.n_sources) {
      throw ContractError("mixing mask: source " + std::to_string(a) + " outside [0, " +
                          std::to_string(mask.n_sources) + ")");
    }
  }
}

MixingMask sample_segment_mask(std::span<const SegmentationMap> segs, double p_select,
                               RngStream& rng) {
  if (segs.empty()) throw ContractError("sample_segment_mask: no segmentation maps");
  if (!(p_select >= 0 && p_select <= 1)) {
    throw ContractError("sample_segment_mask: p_select must lie in [0, 1]");
  }
  const std::size_t h = segs[0].height, w = segs[0].width;
  for (std::size_t i = 1; i < segs.size(); ++i) {
    if (segs[i].height != h || segs[i].width != w) {
      throw DimensionError("sample_segment_mask: map " + std::to_string(i) + " is " +
                           std::to_string(segs[i].height) + "x" + std::to_string(segs[i].width) +
                           ", map 0 is " + std::to_string(h) + "x" + std::to_string(w));
    }
  }
  MixingMask mask{segs.size(), h, w, std::vector<std::uint32_t>(h * w, 0)};
  // Source 0 owns the background; selecting its own segments would be a no-op.
  std::vector<char> selected;
  for (std::size_t i = 1; i < segs.size(); ++i) {
    selected.assign(segs[i].segment_count(), 0);
    for (auto& s : selected) s = rng.bernoulli(p_select) ? 1 : 0;
    for (std::size_t p = 0; p < h * w; ++p) {
      if (selected[segs[i].labels[p]]) mask.assignment[p] = static_cast<std::uint32_t>(i);
    }
  }
  return mask;
}

MixingMask grid_mask(std::size_t cells, std::size_t n_sources, std::size_t h, std::size_t w,
                     RngStream& rng) {
  if (cells == 0) throw ContractError("grid_mask: cells must be >= 1");
  if (n_sources == 0) throw ContractError("grid_mask: n_sources must be >= 1");
  if (h == 0 || w == 0) throw ContractError("grid_mask: empty mask");
  std::vector<std::uint32_t> cell_source(cells * cells);
  for (auto& c : cell_source) c = static_cast<std::uint32_t>(rng.below(n_sources));
  MixingMask mask{n_sources, h, w, std::vector<std::uint32_t>(h * w)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      mask.assignment[y * w + x] = cell_source[(y * cells / h) * cells + x * cells / w];
  return mask;
}

MixingMask reconstruction_mask(std::size_t index, std::size_t n_sources, std::size_t h,
                               std::size_t w) {
  if (index >= n_sources) {
    throw ContractError("reconstruction_mask: index " + std::to_string(index) + " outside [0, " +
                        std::to_string(n_sources) + ")");
  }
  return MixingMask{n_sources, h, w,
                    std::vector<std::uint32_t>(h * w, static_cast<std::uint32_t>(index))};
}

std::vector<SegmentationMap> perturb_segmentation(std::span<const SegmentationMap> segs,
                                                  double noise, RngStream& rng) {
  if (!(noise >= 0 && noise <= 1)) throw ContractError("perturb_segmentation: noise outside [0, 1]");
  std::vector<SegmentationMap> out(segs.begin(), segs.end());
  if (noise == 0) return out;
  if (segs.size() < 2) {
    throw ContractError("perturb_segmentation: needs at least two images when noise > 0");
  }
  const std::size_t h = segs[0].height, w = segs[0].width;
  for (const auto& s : segs) {
    if (s.height != h || s.width != w) throw DimensionError("perturb_segmentation: size mismatch");
  }
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const SegmentationMap& own = segs[i];
    // donor[s] = index of the image lending its labels to segment s, or i.
    std::vector<std::size_t> donor(own.segment_count(), i);
    for (auto& d : donor) {
      if (rng.bernoulli(noise)) {
        const std::size_t pick = rng.below(segs.size() - 1);
        d = pick < i ? pick : pick + 1;
      }
    }
    // Keys (donor image, donor label) keep borrowed labels distinct from own ones.
    std::map<std::pair<std::size_t, std::uint32_t>, std::uint32_t> keys;
    std::vector<std::uint32_t> raw(h * w);
    for (std::size_t p = 0; p < h * w; ++p) {
      const std::size_t d = donor[own.labels[p]];
      const auto key = std::make_pair(d, segs[d].labels[p]);
      auto [it, _] = keys.try_emplace(key, static_cast<std::uint32_t>(keys.size()));
      raw[p] = it->second;
    }
    out[i] = SegmentationMap::from_labels(h, w, raw);
  }
  return out;
}

MixingMask upscale_mask_to_pixels(const MixingMask& mask, std::size_t height, std::size_t width) {
  if (height < mask.height || width < mask.width) {
    throw DimensionError("upscale_mask_to_pixels: target " + std::to_string(height) + "x" +
                         std::to_string(width) + " smaller than mask " +
                         std::to_string(mask.height) + "x" + std::to_string(mask.width));
  }
  MixingMask out{mask.n_sources, height, width, std::vector<std::uint32_t>(height * width)};
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      out.assignment[y * width + x] =
          mask.assignment[(y * mask.height / height) * mask.width + x * mask.width / width];
  return out;
}

}  // namespace hydramix::masking
