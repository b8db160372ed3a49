#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hydramix/classifier/dataset.hpp"
#include "hydramix/networks/networks.hpp"
#include "hydramix/segmentation/segmentation.hpp"

namespace hydramix::classifier {

enum class AugmentKind { none, mixup, mixupn, gridmix, segmix, nmix, hydramix };

std::string to_string(AugmentKind kind);
/// Throws ConfigError on unknown names.
AugmentKind parse_augment_kind(const std::string& name);
/// True for the kinds that mix images of a single class and keep its label.
bool is_same_class(AugmentKind kind);
/// True for the kinds whose masks come from segmentation maps.
bool needs_segmentation(AugmentKind kind);

struct AugmentParams {
  std::size_t n_mix = 4;
  double mixup_alpha = 1.0;
  double dirichlet_alpha = 1.0;
  std::size_t grid_cells = 4;
  double p_select = 0.5;
};

/// A batch of synthesized training images.
struct GeneratedBatch {
  Tensor<float> images;   // B x C x H x W
  Tensor<float> targets;  // B x K label distributions
  std::vector<int> labels;  // shared source class per row, -1 for cross-class mixes
};

/// Source of generated batches for the classifier's p_gen hook.
class Augmenter {
 public:
  virtual ~Augmenter() = default;
  virtual AugmentKind kind() const = 0;

  GeneratedBatch generate(std::size_t batch_size, RngStream& rng);
  std::size_t calls() const { return calls_; }

 protected:
  virtual GeneratedBatch produce(std::size_t batch_size, RngStream& rng) = 0;

 private:
  std::size_t calls_ = 0;
};

/// Pixel-space baselines (mixup, mixupn, gridmix, segmix, nmix). Segmentation
/// maps at dataset resolution are required by segmix and nmix.
std::unique_ptr<Augmenter> make_pixel_augmenter(AugmentKind kind, const LabeledDataset& data,
                                                std::vector<segmentation::SegmentationMap> segmaps,
                                                const AugmentParams& params);

/// Feature mixing through a frozen generator. Encodings of the dataset are
/// computed once and reused for every batch.
std::unique_ptr<Augmenter> make_generator_augmenter(networks::Generator<float> generator,
                                                    const LabeledDataset& data,
                                                    std::vector<segmentation::SegmentationMap> segmaps,
                                                    const AugmentParams& params);

}  // namespace hydramix::classifier
