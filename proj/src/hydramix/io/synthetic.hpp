#pragma once

#include <string>

#include "hydramix/classifier/dataset.hpp"

namespace hydramix::io {

/// Parametric parts-on-background images.
///
/// Every class owns a small pool of part types (a shape combined with a
/// texture); neighbouring classes share one part type, so a single part does
/// not always identify the class. An image places `parts` parts, drawn from
/// its class pool, into distinct quadrants of a noisy background with random
/// per-part colours, sizes, and offsets.
struct SyntheticSpec {
  std::size_t classes = 3;
  std::size_t per_class = 20;
  std::size_t size = 24;
  std::size_t channels = 3;
  std::size_t parts = 3;
  double noise = 0.15;
  bool shared_parts = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Images are identical for equal (spec, split) pairs; different split names
/// give independent draws.
classifier::LabeledDataset make_synthetic(const SyntheticSpec& spec, const std::string& split);

}  // namespace hydramix::io
