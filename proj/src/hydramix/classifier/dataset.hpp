#pragma once

#include <string>
#include <vector>

#include "hydramix/masking/rng.hpp"
#include "hydramix/numerics/tensor.hpp"

namespace hydramix::classifier {

using numerics::Tensor;

/// Images (M x C x H x W, values in [-1, 1]) with integer class labels.
struct LabeledDataset {
  numerics::Tensor<float> images;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::vector<std::vector<std::size_t>> class_index;  // sorted image indices per class
  std::vector<std::string> ids;                       // stable per-image identifiers
  std::string split = "train";

  std::size_t size() const { return labels.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::size_t channels() const { return images.dim(1); }
  std::size_t height() const { return images.dim(2); }
  std::size_t width() const { return images.dim(3); }

  /// Recomputes class_index from labels.
  void rebuild_index();
  /// Throws ContractError when labels, ids, or the index are inconsistent.
  void validate() const;

  /// New dataset holding the given rows in the given order.
  LabeledDataset subset(const std::vector<std::size_t>& rows) const;
  /// Single image as 1 x C x H x W.
  numerics::Tensor<float> image(std::size_t index) const;
  /// Rows stacked as K x C x H x W.
  numerics::Tensor<float> gather(const std::vector<std::size_t>& rows) const;
};

/// Uniform sampling without replacement of n_per_class images per class,
/// deterministic per seed. Keeps the original relative order within the result.
LabeledDataset subsample(const LabeledDataset& dataset, std::size_t n_per_class, std::uint64_t seed);

}  // namespace hydramix::classifier
