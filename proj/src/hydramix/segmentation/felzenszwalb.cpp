#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "hydramix/segmentation/segmentation.hpp"

namespace hydramix::segmentation {

using numerics::ContractError;
using numerics::DimensionError;
using numerics::Tensor;

SegmentationMap SegmentationMap::from_labels(std::size_t height, std::size_t width,
                                             const std::vector<std::uint32_t>& raw) {
  if (raw.size() != height * width) {
    throw DimensionError("segmentation: " + std::to_string(raw.size()) + " labels for " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  SegmentationMap seg;
  seg.height = height;
  seg.width = width;
  seg.labels.resize(raw.size());
  std::unordered_map<std::uint32_t, std::uint32_t> remap;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(raw[i], static_cast<std::uint32_t>(remap.size()));
    if (inserted) seg.segment_sizes.push_back(0);
    seg.labels[i] = it->second;
    seg.segment_sizes[it->second] += 1;
  }
  return seg;
}

void validate(const SegmentationMap& seg) {
  if (seg.labels.size() != seg.height * seg.width || seg.labels.empty()) {
    throw ContractError("segmentation map: label count does not match height*width");
  }
  std::vector<std::uint32_t> counts(seg.segment_sizes.size(), 0);
  for (std::uint32_t l : seg.labels) {
    if (l >= counts.size()) throw ContractError("segmentation map: label outside 0..S-1");
    counts[l] += 1;
  }
  if (counts != seg.segment_sizes) throw ContractError("segmentation map: segment sizes stale");
  for (std::uint32_t c : counts) {
    if (c == 0) throw ContractError("segmentation map: labels are not contiguous");
  }
}

SegParams SegParams::defaults_for(std::size_t height, std::size_t width) {
  SegParams p;
  p.k = 100.0 * static_cast<double>(height * width) / (96.0 * 96.0);
  return p;
}

void SegParams::validate() const {
  if (!(k > 0)) throw ContractError("segmentation: k must be positive");
  if (!(sigma >= 0)) throw ContractError("segmentation: sigma must be >= 0");
  if (min_size < 1) throw ContractError("segmentation: min_size must be >= 1");
}

namespace {

struct ImageView {
  std::size_t c, h, w;
  std::span<const double> data;
};

ImageView view_of(const Tensor<double>& image) {
  if (image.rank() == 3) return {image.dim(0), image.dim(1), image.dim(2), image.values()};
  if (image.rank() == 4 && image.dim(0) == 1)
    return {image.dim(1), image.dim(2), image.dim(3), image.values()};
  throw DimensionError("segmentation expects a C x H x W image, got " +
                       numerics::shape_str(image.shape()));
}

std::size_t reflect(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<long>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    std::size_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const std::size_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }
  std::size_t join(std::size_t a, std::size_t b) {
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    if (rank_[a] == rank_[b]) rank_[a] += 1;
    return a;
  }
  std::size_t size(std::size_t root) const { return size_[root]; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
  std::vector<std::size_t> size_;
};

struct Edge {
  double weight;
  std::size_t a, b;
};

}  // namespace

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double total = 0;
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    total += taps[i + radius];
  }
  for (double& t : taps) t /= total;
  return taps;
}

Tensor<double> gaussian_smooth(const Tensor<double>& image, double sigma) {
  if (sigma < 0) throw ContractError("gaussian_smooth: sigma must be >= 0");
  const ImageView v = view_of(image);
  if (sigma == 0) return image.clone();
  const auto taps = gaussian_kernel(sigma);
  const long radius = static_cast<long>(taps.size() / 2);
  std::vector<double> tmp(v.data.size()), out(v.data.size());
  for (std::size_t c = 0; c < v.c; ++c) {
    const std::size_t base = c * v.h * v.w;
    for (std::size_t y = 0; y < v.h; ++y)
      for (std::size_t x = 0; x < v.w; ++x) {
        double acc = 0;
        for (long t = -radius; t <= radius; ++t)
          acc += taps[t + radius] * v.data[base + y * v.w + reflect(static_cast<long>(x) + t, v.w)];
        tmp[base + y * v.w + x] = acc;
      }
    for (std::size_t y = 0; y < v.h; ++y)
      for (std::size_t x = 0; x < v.w; ++x) {
        double acc = 0;
        for (long t = -radius; t <= radius; ++t)
          acc += taps[t + radius] * tmp[base + reflect(static_cast<long>(y) + t, v.h) * v.w + x];
        out[base + y * v.w + x] = acc;
      }
  }
  return Tensor<double>(image.shape(), std::move(out));
}

SegmentationMap felzenszwalb(const Tensor<double>& image, const SegParams& params) {
  params.validate();
  const Tensor<double> smooth = gaussian_smooth(image, params.sigma);
  const ImageView v = view_of(smooth);
  const std::size_t n = v.h * v.w;

  auto distance = [&](std::size_t p, std::size_t q) {
    double acc = 0;
    for (std::size_t c = 0; c < v.c; ++c) {
      const double d = 255.0 * (v.data[c * n + p] - v.data[c * n + q]);
      acc += d * d;
    }
    return std::sqrt(acc);
  };

  // Raster order, right edge before down edge; this order is the tie-break.
  std::vector<Edge> edges;
  edges.reserve(2 * n);
  for (std::size_t y = 0; y < v.h; ++y) {
    for (std::size_t x = 0; x < v.w; ++x) {
      const std::size_t p = y * v.w + x;
      if (x + 1 < v.w) edges.push_back({distance(p, p + 1), p, p + 1});
      if (y + 1 < v.h) edges.push_back({distance(p, p + v.w), p, p + v.w});
    }
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& l, const Edge& r) { return l.weight < r.weight; });

  DisjointSets sets(n);
  std::vector<double> threshold(n, params.k);
  for (const Edge& e : edges) {
    std::size_t a = sets.find(e.a);
    std::size_t b = sets.find(e.b);
    if (a == b) continue;
    if (e.weight <= threshold[a] && e.weight <= threshold[b]) {
      a = sets.join(a, b);
      threshold[a] = e.weight + params.k / static_cast<double>(sets.size(a));
    }
  }
  const std::size_t min_size = static_cast<std::size_t>(params.min_size);
  for (const Edge& e : edges) {
    const std::size_t a = sets.find(e.a);
    const std::size_t b = sets.find(e.b);
    if (a != b && (sets.size(a) < min_size || sets.size(b) < min_size)) sets.join(a, b);
  }

  std::vector<std::uint32_t> roots(n);
  for (std::size_t p = 0; p < n; ++p) roots[p] = static_cast<std::uint32_t>(sets.find(p));
  return SegmentationMap::from_labels(v.h, v.w, roots);
}

SegmentationMap rescale_segmentation(const SegmentationMap& seg, std::size_t out_h,
                                     std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ContractError("rescale_segmentation: empty output");
  std::vector<std::uint32_t> raw(out_h * out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const std::size_t sy = y * seg.height / out_h;
    for (std::size_t x = 0; x < out_w; ++x) {
      raw[y * out_w + x] = seg.labels[sy * seg.width + x * seg.width / out_w];
    }
  }
  return SegmentationMap::from_labels(out_h, out_w, raw);
}

SegmentationMap downscale_segmentation(const SegmentationMap& seg, std::size_t out_h,
                                       std::size_t out_w) {
  if (out_h > seg.height || out_w > seg.width) {
    throw DimensionError("downscale_segmentation: output " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " exceeds input " + std::to_string(seg.height) +
                         "x" + std::to_string(seg.width));
  }
  return rescale_segmentation(seg, out_h, out_w);
}

}  // namespace hydramix::segmentation
