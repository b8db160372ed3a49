#include "hydramix/classifier/augment.hpp"

#include <algorithm>

#include "hydramix/masking/masking.hpp"
#include "hydramix/pixelmix/pixelmix.hpp"

namespace hydramix::classifier {

using networks::ConfigError;
using numerics::ContractError;

namespace {

constexpr std::pair<AugmentKind, const char*> kNames[] = {
    {AugmentKind::none, "none"},       {AugmentKind::mixup, "mixup"},
    {AugmentKind::mixupn, "mixupn"},   {AugmentKind::gridmix, "gridmix"},
    {AugmentKind::segmix, "segmix"},   {AugmentKind::nmix, "nmix"},
    {AugmentKind::hydramix, "hydramix"}};

}  // namespace

std::string to_string(AugmentKind kind) {
  for (const auto& [k, name] : kNames)
    if (k == kind) return name;
  return "unknown";
}

AugmentKind parse_augment_kind(const std::string& name) {
  for (const auto& [k, n] : kNames)
    if (name == n) return k;
  throw ConfigError("unknown augment kind '" + name +
                    "' (expected none|mixup|mixupn|gridmix|segmix|nmix|hydramix)");
}

bool is_same_class(AugmentKind kind) {
  return kind == AugmentKind::gridmix || kind == AugmentKind::segmix ||
         kind == AugmentKind::nmix || kind == AugmentKind::hydramix;
}

bool needs_segmentation(AugmentKind kind) {
  return kind == AugmentKind::segmix || kind == AugmentKind::nmix || kind == AugmentKind::hydramix;
}

GeneratedBatch Augmenter::generate(std::size_t batch_size, RngStream& rng) {
  if (batch_size == 0) throw ContractError("augmenter: batch size must be >= 1");
  ++calls_;
  auto batch = produce(batch_size, rng);
  if (is_same_class(kind())) {
    const std::size_t k = batch.targets.dim(1);
    for (std::size_t b = 0; b < batch_size; ++b) {
      const int y = batch.labels[b];
      for (std::size_t c = 0; c < k; ++c) {
        const float expect = static_cast<int>(c) == y ? 1.0f : 0.0f;
        if (y < 0 || batch.targets[b * k + c] != expect) {
          throw ContractError("augmenter: same-class batch row " + std::to_string(b) +
                              " does not carry its source class label");
        }
      }
    }
  }
  return batch;
}

namespace {

class PoolAugmenter : public Augmenter {
 public:
  PoolAugmenter(AugmentKind kind, const LabeledDataset& data,
                std::vector<segmentation::SegmentationMap> segmaps, const AugmentParams& params)
      : kind_(kind), data_(data), segs_(std::move(segmaps)), params_(params) {
    data_.validate();
    for (std::size_t c = 0; c < data_.class_index.size(); ++c)
      if (!data_.class_index[c].empty()) classes_.push_back(c);
    if (classes_.empty()) throw ContractError("augmenter: empty dataset");
    if (params_.n_mix < 2) throw ConfigError("augmenter: n_mix must be >= 2");
    if (needs_segmentation(kind_) && segs_.size() != data_.size()) {
      throw ContractError("augmenter '" + to_string(kind_) + "' needs one segmentation map per image (" +
                          std::to_string(segs_.size()) + " for " + std::to_string(data_.size()) + ")");
    }
  }

  AugmentKind kind() const override { return kind_; }

 protected:
  /// n images of one uniformly drawn class, without replacement when possible.
  std::vector<std::size_t> same_class_group(std::size_t n, RngStream& rng, int& cls) const {
    const std::size_t c = classes_[rng.below(classes_.size())];
    cls = static_cast<int>(c);
    const auto& members = data_.class_index[c];
    std::vector<std::size_t> rows;
    if (members.size() >= n) {
      for (std::size_t pick : rng.choose(members.size(), n)) rows.push_back(members[pick]);
    } else {
      for (std::size_t i = 0; i < n; ++i) rows.push_back(members[rng.below(members.size())]);
    }
    return rows;
  }

  std::vector<float> one_hot(int cls) const {
    std::vector<float> t(data_.num_classes(), 0.0f);
    t[static_cast<std::size_t>(cls)] = 1.0f;
    return t;
  }

  GeneratedBatch assemble(std::vector<float> images, std::vector<float> targets,
                          std::vector<int> labels) const {
    const std::size_t b = labels.size();
    GeneratedBatch out;
    out.images = Tensor<float>({b, data_.channels(), data_.height(), data_.width()}, std::move(images));
    out.targets = Tensor<float>({b, data_.num_classes()}, std::move(targets));
    out.labels = std::move(labels);
    return out;
  }

  AugmentKind kind_;
  LabeledDataset data_;
  std::vector<segmentation::SegmentationMap> segs_;
  AugmentParams params_;
  std::vector<std::size_t> classes_;
};

class PixelAugmenter final : public PoolAugmenter {
 public:
  using PoolAugmenter::PoolAugmenter;

 protected:
  GeneratedBatch produce(std::size_t batch_size, RngStream& rng) override {
    std::vector<float> images, targets;
    std::vector<int> labels;
    const std::size_t k = data_.num_classes();
    for (std::size_t b = 0; b < batch_size; ++b) {
      Tensor<float> image;
      std::vector<float> target;
      int label = -1;
      switch (kind_) {
        case AugmentKind::mixup: {
          const std::size_t i = rng.below(data_.size()), j = rng.below(data_.size());
          auto s = pixelmix::mixup(data_.image(i), data_.image(j), data_.labels[i], data_.labels[j],
                                   k, params_.mixup_alpha, rng);
          image = s.image;
          target.assign(s.label_weights.begin(), s.label_weights.end());
          break;
        }
        case AugmentKind::mixupn: {
          const std::size_t n = std::min(params_.n_mix, data_.size());
          if (n < 2) throw ContractError("mixupn: dataset needs at least two images");
          const auto rows = rng.choose(data_.size(), n);
          std::vector<int> ys;
          for (auto r : rows) ys.push_back(data_.labels[r]);
          auto s = pixelmix::mixup_n(data_.gather(rows), ys, k, params_.dirichlet_alpha, rng);
          image = s.image;
          target.assign(s.label_weights.begin(), s.label_weights.end());
          break;
        }
        case AugmentKind::gridmix:
        case AugmentKind::segmix:
        case AugmentKind::nmix: {
          const std::size_t n = kind_ == AugmentKind::segmix ? 2 : params_.n_mix;
          const auto rows = same_class_group(n, rng, label);
          masking::MixingMask mask;
          if (kind_ == AugmentKind::gridmix) {
            mask = masking::grid_mask(params_.grid_cells, n, data_.height(), data_.width(), rng);
          } else {
            std::vector<segmentation::SegmentationMap> segs;
            for (auto r : rows) segs.push_back(segs_[r]);
            mask = masking::sample_segment_mask(segs, params_.p_select, rng);
          }
          image = pixelmix::mask_mix_pixels(data_.gather(rows), mask);
          target = one_hot(label);
          break;
        }
        default:
          throw ContractError("pixel augmenter cannot produce '" + to_string(kind_) + "'");
      }
      images.insert(images.end(), image.values().begin(), image.values().end());
      targets.insert(targets.end(), target.begin(), target.end());
      labels.push_back(label);
    }
    return assemble(std::move(images), std::move(targets), std::move(labels));
  }
};

class GeneratorAugmenter final : public PoolAugmenter {
 public:
  GeneratorAugmenter(networks::Generator<float> gen, const LabeledDataset& data,
                     std::vector<segmentation::SegmentationMap> segmaps, const AugmentParams& params)
      : PoolAugmenter(AugmentKind::hydramix, data, std::move(segmaps), params), gen_(std::move(gen)) {
    if (gen_.config().in_channels != data_.channels()) {
      throw ContractError("hydramix: generator expects " + std::to_string(gen_.config().in_channels) +
                          " channels, dataset has " + std::to_string(data_.channels()));
    }
    for (auto& p : gen_.parameters()) p.tensor.set_requires_grad(false);
    features_ = gen_.encode(gen_.lift(data_.images));
    const std::size_t fh = gen_.feature_size(data_.height()), fw = gen_.feature_size(data_.width());
    for (auto& s : segs_) s = segmentation::rescale_segmentation(s, fh, fw);
  }

 protected:
  GeneratedBatch produce(std::size_t batch_size, RngStream& rng) override {
    std::vector<Tensor<float>> mixed;
    std::vector<float> targets;
    std::vector<int> labels;
    for (std::size_t b = 0; b < batch_size; ++b) {
      int label = -1;
      const auto rows = same_class_group(params_.n_mix, rng, label);
      std::vector<segmentation::SegmentationMap> segs;
      for (auto r : rows) segs.push_back(segs_[r]);
      const auto mask = masking::sample_segment_mask(segs, params_.p_select, rng);
      mixed.push_back(networks::mix_features(numerics::index_select(features_, rows), mask));
      const auto t = one_hot(label);
      targets.insert(targets.end(), t.begin(), t.end());
      labels.push_back(label);
    }
    const auto images =
        gen_.lower(gen_.decode(numerics::concat<float>(mixed)), data_.height(), data_.width());
    std::vector<float> values(images.values().begin(), images.values().end());
    return assemble(std::move(values), std::move(targets), std::move(labels));
  }

 private:
  networks::Generator<float> gen_;
  Tensor<float> features_;
};

}  // namespace

std::unique_ptr<Augmenter> make_pixel_augmenter(AugmentKind kind, const LabeledDataset& data,
                                                std::vector<segmentation::SegmentationMap> segmaps,
                                                const AugmentParams& params) {
  if (kind == AugmentKind::none || kind == AugmentKind::hydramix) {
    throw ConfigError("'" + to_string(kind) + "' is not a pixel augmentation");
  }
  return std::make_unique<PixelAugmenter>(kind, data, std::move(segmaps), params);
}

std::unique_ptr<Augmenter> make_generator_augmenter(networks::Generator<float> generator,
                                                    const LabeledDataset& data,
                                                    std::vector<segmentation::SegmentationMap> segmaps,
                                                    const AugmentParams& params) {
  return std::make_unique<GeneratorAugmenter>(std::move(generator), data, std::move(segmaps), params);
}

}  // namespace hydramix::classifier
