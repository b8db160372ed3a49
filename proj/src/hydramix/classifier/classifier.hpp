#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "hydramix/classifier/augment.hpp"
#include "hydramix/classifier/dataset.hpp"
#include "hydramix/networks/checkpoint.hpp"

namespace hydramix::classifier {

struct ClassifierConfig {
  std::vector<std::size_t> widths{16, 32, 64, 64};
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double lr = 0.05;
  bool cosine = true;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  /// Probability of a generated batch; unset means 0.5 with an augmenter and 0 without.
  std::optional<double> p_gen;
  AugmentKind augment = AugmentKind::none;
  AugmentParams mix;
  bool basic_augment = true;
  std::size_t crop_padding = 4;
  std::uint64_t seed = 0;

  double effective_p_gen() const { return p_gen.value_or(augment == AugmentKind::none ? 0.0 : 0.5); }
  void validate() const;
};

void to_json(nlohmann::json& j, const ClassifierConfig& c);
void from_json(const nlohmann::json& j, ClassifierConfig& c);

/// Blocks of conv3x3 -> instance norm -> ReLU -> 2x2 max pool, then a linear head.
class SmallCnn {
 public:
  SmallCnn(std::vector<std::size_t> widths, std::size_t channels, std::size_t height,
           std::size_t width, std::size_t num_classes, RngStream& init);

  /// N x C x H x W -> N x K logits.
  Tensor<float> operator()(const Tensor<float>& images) const;

  networks::ParameterList<float>& parameters() { return params_; }
  const networks::ParameterList<float>& parameters() const { return params_; }
  nlohmann::json describe() const;
  std::size_t num_classes() const { return num_classes_; }

 private:
  std::vector<std::size_t> widths_;
  std::size_t channels_, height_, width_, num_classes_;
  std::vector<networks::ConvLayer<float>> convs_;
  Tensor<float> head_weight_, head_bias_;
  networks::ParameterList<float> params_;
};

struct ClassifierStep {
  std::size_t step = 0;
  double lr = 0;
  double loss = 0;
  bool generated = false;

  nlohmann::json to_json() const;
};

struct ClassifierRun {
  SmallCnn model;
  std::size_t generated_steps = 0;
  std::size_t original_steps = 0;
};

std::size_t classifier_total_steps(const ClassifierConfig& config, std::size_t dataset_size);
double cosine_lr(const ClassifierConfig& config, std::size_t step, std::size_t total_steps);

/// Random crop from a zero-padded copy plus horizontal flip with probability 1/2,
/// drawn independently per image.
Tensor<float> basic_augment(const Tensor<float>& images, std::size_t padding, RngStream& rng);

/// Split labels of the seed: "init", "batches" (original batch order), "pgen"
/// (batch-type draws), "augment" (crop and flip), "mix" (augmenter sampling).
ClassifierRun train_classifier(const LabeledDataset& train, Augmenter* augmenter,
                               const ClassifierConfig& config,
                               const std::function<void(const ClassifierStep&)>& on_step = {});

struct EvalResult {
  double accuracy = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<double> per_class;  // NaN for classes absent from the test set
  std::vector<int> predictions;

  nlohmann::json to_json(const std::vector<std::string>& class_names) const;
};

/// Top-1 accuracy with the lowest class index winning ties.
EvalResult evaluate(const SmallCnn& model, const LabeledDataset& test);
EvalResult score_predictions(std::span<const int> predictions, std::span<const int> labels,
                             std::size_t num_classes);

networks::CheckpointFile classifier_checkpoint(const SmallCnn& model,
                                               const std::vector<std::string>& class_names);
SmallCnn load_classifier(const networks::CheckpointFile& file);

}  // namespace hydramix::classifier
