#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hydramix/numerics/tensor.hpp"

namespace hydramix::io {

/// 8-bit image with interleaved channels (1 = gray, 3 = RGB).
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;  // height * width * channels
};

/// Decodes any PNG to 8-bit gray or RGB; alpha is dropped and palettes expanded.
Image8 read_png(const std::filesystem::path& path);

/// Encodes with fixed settings (no timestamps, default filters, level 6) so
/// identical pixels give identical bytes. Written atomically.
void write_png(const std::filesystem::path& path, const Image8& image);

/// Planar C x H x W values in [-1, 1] from interleaved bytes.
numerics::Tensor<float> to_tensor(const Image8& image);

/// Inverse of to_tensor with rounding and clamping; accepts C x H x W or 1 x C x H x W.
Image8 from_tensor(const numerics::Tensor<float>& image);

}  // namespace hydramix::io
