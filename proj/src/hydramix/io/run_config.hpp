#pragma once

#include <optional>

#include "json.hpp"

#include "hydramix/classifier/classifier.hpp"
#include "hydramix/networks/networks.hpp"
#include "hydramix/segmentation/segmentation.hpp"
#include "hydramix/training/losses.hpp"

namespace hydramix::io {

/// Segmentation settings; fields left unset fall back to SegParams::defaults_for
/// the image size.
struct SegmentationSection {
  std::optional<double> k;
  std::optional<double> sigma;
  std::optional<int> min_size;

  segmentation::SegParams resolve(std::size_t height, std::size_t width) const;
};

/// Mask sampling shared by generator training and the classifier augmenters.
struct MaskingSection {
  std::optional<std::size_t> n_mix;
  std::optional<double> p_select;
};

struct CseSection {
  double tau = 0.01;
};

/// Merged configuration tree of a run.
///
/// JSON sections: "generator", "discriminator", "training", "classifier",
/// "segmentation", "masking", "cse". Every section is optional; unknown
/// sections or keys are rejected. Values in "masking" override n_mix and
/// p_select in both "training" and "classifier".
struct RunConfig {
  networks::GeneratorConfig generator;
  networks::DiscriminatorConfig discriminator;
  training::TrainConfig training;
  classifier::ClassifierConfig classifier;
  SegmentationSection segmentation;
  MaskingSection masking;
  CseSection cse;

  /// Sets the training and classifier seeds.
  void set_seed(std::uint64_t seed);
  void validate() const;
};

/// Throws ContractError (or ConfigError) on unknown keys and invalid values.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);

/// Writes `overlay` into `base` key by key, descending into objects.
void merge_json(nlohmann::json& base, const nlohmann::json& overlay);

}  // namespace hydramix::io
