#pragma once

#include <functional>
#include <vector>

#include "hydramix/classifier/dataset.hpp"
#include "hydramix/networks/checkpoint.hpp"
#include "hydramix/numerics/optim.hpp"
#include "hydramix/training/losses.hpp"

namespace hydramix::training {

/// One line of the JSON-lines training log.
struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0;
  double rec = 0;
  double per = 0;
  double gdisc = 0;
  double total = 0;
  double disc = 0;
  double d_real = 0;  // mean patch probability on real images
  double d_fake = 0;  // mean patch probability on generated images
  std::vector<int> classes;

  nlohmann::json to_json() const;
};

/// Alternating generator / discriminator optimization over same-class groups.
///
/// Split labels of the seed: "init" (weights), "batches" (class and image
/// draws), "masks" (segment masks and segmentation noise), "perceptual"
/// (image subset of the perceptual term).
class GeneratorTrainer {
 public:
  GeneratorTrainer(classifier::LabeledDataset data,
                   const std::vector<segmentation::SegmentationMap>& segmaps,
                   const networks::GeneratorConfig& gen_config,
                   const networks::DiscriminatorConfig& disc_config, const TrainConfig& config);

  /// Continues a run from a trainer checkpoint.
  GeneratorTrainer(classifier::LabeledDataset data,
                   const std::vector<segmentation::SegmentationMap>& segmaps,
                   const networks::CheckpointFile& checkpoint);

  StepRecord step();

  std::size_t steps_done() const { return step_; }
  std::size_t total_steps() const { return config_.total_steps(data_.size()); }
  bool finished() const { return step_ >= total_steps(); }

  const networks::Generator<float>& generator() const { return gen_; }
  const networks::Discriminator<float>& discriminator() const { return disc_; }
  const TrainConfig& config() const { return config_; }

  networks::CheckpointFile checkpoint() const;

 private:
  struct Streams {
    RngStream batches, masks, perceptual;
  };
  void check_inputs(const std::vector<segmentation::SegmentationMap>& segmaps);
  std::vector<std::size_t> sample_group(std::size_t& class_out);

  classifier::LabeledDataset data_;
  TrainConfig config_;
  networks::Generator<float> gen_;
  networks::Discriminator<float> disc_;
  std::vector<segmentation::SegmentationMap> feature_segs_;
  std::vector<numerics::AdamState<float>> gen_adam_, disc_adam_;
  std::vector<std::size_t> populated_classes_;
  Streams rng_;
  std::size_t step_ = 0;
};

struct TrainCallbacks {
  std::function<void(const StepRecord&)> on_step;
  /// Receives intermediate checkpoints (every config.checkpoint_every steps).
  std::function<void(std::size_t step, const networks::CheckpointFile&)> on_checkpoint;
};

/// Runs every remaining step and returns the final checkpoint.
networks::CheckpointFile run_training(GeneratorTrainer& trainer, const TrainCallbacks& callbacks = {});

networks::CheckpointFile train_generator(const classifier::LabeledDataset& data,
                                         const std::vector<segmentation::SegmentationMap>& segmaps,
                                         const networks::GeneratorConfig& gen_config,
                                         const networks::DiscriminatorConfig& disc_config,
                                         const TrainConfig& config,
                                         const TrainCallbacks& callbacks = {});

/// Generator stored in a trainer checkpoint, ready for inference.
networks::Generator<float> load_generator(const networks::CheckpointFile& checkpoint);

/// `per_class` feature-mixed images for every class of `data`, class-major
/// (K * per_class x C x H x W). Each image mixes n_mix images of one class
/// (drawn without replacement when the class is large enough) under a segment
/// mask built from `segmaps`, which are at dataset resolution.
numerics::Tensor<float> generate_per_class(const networks::Generator<float>& generator,
                                 const classifier::LabeledDataset& data,
                                 const std::vector<segmentation::SegmentationMap>& segmaps,
                                 std::size_t n_mix, double p_select, std::size_t per_class,
                                 RngStream& rng);

}  // namespace hydramix::training
