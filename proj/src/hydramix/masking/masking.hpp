#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hydramix/masking/rng.hpp"
#include "hydramix/numerics/tensor.hpp"
#include "hydramix/segmentation/segmentation.hpp"

namespace hydramix::masking {

/// Discrete N-source mixing mask stored as a per-position source index.
/// The one-hot form M[i, h, w] = (assignment[h, w] == i) sums to one at every
/// position by construction.
struct MixingMask {
  std::size_t n_sources = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> assignment;  // height * width, values in [0, n_sources)

  std::uint32_t at(std::size_t y, std::size_t x) const { return assignment[y * width + x]; }

  /// N x H x W tensor of zeros and ones.
  template <typename T>
  numerics::Tensor<T> one_hot() const;

  bool operator==(const MixingMask&) const = default;
};

/// Throws ContractError when an assignment is out of range or sizes disagree.
void validate(const MixingMask& mask);

/// Segment-guided mask: starts with source 0 everywhere; for every later
/// source i (ascending) each segment of segs[i] is selected with probability
/// p_select and its positions are overwritten with i.
MixingMask sample_segment_mask(std::span<const segmentation::SegmentationMap> segs,
                               double p_select, RngStream& rng);

/// cells x cells grid, each cell drawn uniformly over sources, upscaled by
/// nearest neighbour to h x w.
MixingMask grid_mask(std::size_t cells, std::size_t n_sources, std::size_t h, std::size_t w,
                     RngStream& rng);

/// Selects source `index` everywhere.
MixingMask reconstruction_mask(std::size_t index, std::size_t n_sources, std::size_t h,
                               std::size_t w);

/// With probability `noise` per segment, the segment's pixels take the labels
/// of a uniformly chosen other image's map at the same positions.
std::vector<segmentation::SegmentationMap> perturb_segmentation(
    std::span<const segmentation::SegmentationMap> segs, double noise, RngStream& rng);

/// Nearest (floor-mapped) upscale of the assignment to H x W.
MixingMask upscale_mask_to_pixels(const MixingMask& mask, std::size_t height, std::size_t width);

}  // namespace hydramix::masking
