#pragma once

#include <cstdint>
#include <vector>

#include "hydramix/numerics/tensor.hpp"

namespace hydramix::segmentation {

/// Per-pixel segment labels, densely numbered 0..S-1 in raster order of first
/// appearance.
struct SegmentationMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> labels;         // height * width, row-major
  std::vector<std::uint32_t> segment_sizes;  // pixel count per label

  std::size_t segment_count() const { return segment_sizes.size(); }
  std::uint32_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }

  /// Relabels densely by first appearance and recomputes segment sizes.
  static SegmentationMap from_labels(std::size_t height, std::size_t width,
                                     const std::vector<std::uint32_t>& raw);

  bool operator==(const SegmentationMap&) const = default;
};

/// Throws ContractError unless labels are dense, sizes match, and counts sum to H*W.
void validate(const SegmentationMap& seg);

struct SegParams {
  double k = 100.0;     // merge threshold scale
  double sigma = 0.8;   // Gaussian pre-smoothing, pixels
  int min_size = 10;    // smallest segment kept, pixels

  /// Canonical settings with k scaled by (H*W)/(96*96).
  static SegParams defaults_for(std::size_t height, std::size_t width);
  void validate() const;
};

/// Separable Gaussian blur of a C x H x W image (or 1 x C x H x W), kernel
/// radius ceil(3*sigma), reflective border. sigma == 0 returns a copy.
numerics::Tensor<double> gaussian_smooth(const numerics::Tensor<double>& image, double sigma);

/// Normalized 1-D Gaussian taps of radius ceil(3*sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Graph-based segmentation on the 4-connected pixel grid. Edge weights are the
/// Euclidean color distance of the smoothed image on a 0..255 intensity scale;
/// input values are expected in [0, 1].
SegmentationMap felzenszwalb(const numerics::Tensor<double>& image, const SegParams& params);

/// Nearest (floor-mapped) resampling without the size precondition; used when
/// a generator operates above the segmentation resolution.
SegmentationMap rescale_segmentation(const SegmentationMap& seg, std::size_t out_h,
                                     std::size_t out_w);

/// Floor-mapped nearest downscale; out dims must not exceed input dims.
SegmentationMap downscale_segmentation(const SegmentationMap& seg, std::size_t out_h,
                                       std::size_t out_w);

}  // namespace hydramix::segmentation
