#include "hydramix/training/trainer.hpp"

#include <numeric>

#include "hydramix/io/binary.hpp"

namespace hydramix::training {

using networks::CheckpointFile;
using numerics::ContractError;
using numerics::Tensor;

nlohmann::json StepRecord::to_json() const {
  return {{"step", step}, {"epoch", epoch},   {"lr", lr},        {"rec", rec},
          {"per", per},   {"gdisc", gdisc},   {"total", total},  {"disc", disc},
          {"d_real", d_real}, {"d_fake", d_fake}, {"classes", classes}};
}

namespace {

networks::ParameterList<float> prefixed(const networks::ParameterList<float>& params,
                                        const std::string& prefix) {
  networks::ParameterList<float> out;
  for (const auto& p : params) out.push_back({prefix + p.name, p.tensor});
  return out;
}

std::vector<numerics::AdamState<float>> adam_states(const networks::ParameterList<float>& params,
                                                    const TrainConfig& c) {
  std::vector<numerics::AdamState<float>> out;
  for (const auto& p : params) {
    out.push_back(numerics::AdamState<float>::for_param(p.tensor, c.beta1, c.beta2));
  }
  return out;
}

void save_adam(CheckpointFile& file, const std::string& prefix,
               const networks::ParameterList<float>& params,
               const std::vector<numerics::AdamState<float>>& states, nlohmann::json& steps) {
  steps = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params[i].tensor.shape();
    file.records.push_back(networks::record_of(prefix + ".m/" + params[i].name, shape, states[i].m));
    file.records.push_back(networks::record_of(prefix + ".v/" + params[i].name, shape, states[i].v));
    steps.push_back(states[i].step);
  }
}

void load_adam(const CheckpointFile& file, const std::string& prefix,
               const networks::ParameterList<float>& params,
               std::vector<numerics::AdamState<float>>& states, const nlohmann::json& steps) {
  if (steps.size() != params.size()) throw io::FormatError("checkpoint: optimizer state count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    states[i].m = networks::record_values<float>(file.record(prefix + ".m/" + params[i].name));
    states[i].v = networks::record_values<float>(file.record(prefix + ".v/" + params[i].name));
    states[i].step = steps[i].get<long>();
    if (states[i].m.size() != params[i].tensor.size() || states[i].v.size() != params[i].tensor.size()) {
      throw io::FormatError("checkpoint: optimizer state for '" + params[i].name + "' has wrong size");
    }
  }
}

nlohmann::json stream_json(const RngStream& s) { return {s.seed(), s.counter()}; }

RngStream stream_from(const nlohmann::json& j) {
  return RngStream(j.at(0).get<std::uint64_t>(), j.at(1).get<std::uint64_t>());
}

RngStream init_stream(const TrainConfig& c, const char* which) {
  return RngStream(c.seed).split("init").split(which);
}

template <typename Config>
Config config_from(const CheckpointFile& file, const char* key) {
  return file.config.at(key).get<Config>();
}

std::vector<Tensor<float>> tensors(const networks::ParameterList<float>& params) {
  return networks::tensors_of(params);
}

double mean_of(const Tensor<float>& t) {
  double s = 0;
  for (float v : t.values()) s += v;
  return s / static_cast<double>(t.size());
}

}  // namespace

GeneratorTrainer::GeneratorTrainer(classifier::LabeledDataset data,
                                   const std::vector<segmentation::SegmentationMap>& segmaps,
                                   const networks::GeneratorConfig& gen_config,
                                   const networks::DiscriminatorConfig& disc_config,
                                   const TrainConfig& config)
    : data_(std::move(data)),
      config_(config),
      gen_([&] {
        auto rng = init_stream(config, "generator");
        return networks::Generator<float>(gen_config, rng);
      }()),
      disc_([&] {
        auto rng = init_stream(config, "discriminator");
        return networks::Discriminator<float>(disc_config, rng);
      }()),
      rng_{RngStream(config.seed).split("batches"), RngStream(config.seed).split("masks"),
           RngStream(config.seed).split("perceptual")} {
  config_.validate();
  check_inputs(segmaps);
  gen_adam_ = adam_states(gen_.parameters(), config_);
  disc_adam_ = adam_states(disc_.parameters(), config_);
}

GeneratorTrainer::GeneratorTrainer(classifier::LabeledDataset data,
                                   const std::vector<segmentation::SegmentationMap>& segmaps,
                                   const CheckpointFile& checkpoint)
    : GeneratorTrainer(std::move(data), segmaps,
                       config_from<networks::GeneratorConfig>(checkpoint, "generator"),
                       config_from<networks::DiscriminatorConfig>(checkpoint, "discriminator"),
                       config_from<TrainConfig>(checkpoint, "train")) {
  const auto& meta = checkpoint.config;
  if (meta.value("kind", "") != "generator-trainer") {
    throw io::FormatError("checkpoint is not a generator training checkpoint");
  }
  const auto& image = meta.at("image");
  if (image.at("channels").get<std::size_t>() != data_.channels() ||
      image.at("height").get<std::size_t>() != data_.height() ||
      image.at("width").get<std::size_t>() != data_.width()) {
    throw ContractError("checkpoint was trained on a different image geometry");
  }
  auto gp = prefixed(gen_.parameters(), "G/");
  auto dp = prefixed(disc_.parameters(), "D/");
  networks::restore_parameters(checkpoint, gp);
  networks::restore_parameters(checkpoint, dp);
  load_adam(checkpoint, "G", gen_.parameters(), gen_adam_, meta.at("adam_steps").at("G"));
  load_adam(checkpoint, "D", disc_.parameters(), disc_adam_, meta.at("adam_steps").at("D"));
  step_ = meta.at("step").get<std::size_t>();
  const auto& streams = meta.at("rng");
  rng_.batches = stream_from(streams.at("batches"));
  rng_.masks = stream_from(streams.at("masks"));
  rng_.perceptual = stream_from(streams.at("perceptual"));
}

void GeneratorTrainer::check_inputs(const std::vector<segmentation::SegmentationMap>& segmaps) {
  if (data_.size() == 0) throw ContractError("train_generator: empty dataset");
  data_.validate();
  if (data_.channels() != gen_.config().in_channels) {
    throw ContractError("train_generator: dataset has " + std::to_string(data_.channels()) +
                        " channels, generator expects " + std::to_string(gen_.config().in_channels));
  }
  if (segmaps.size() != data_.size()) {
    throw ContractError("train_generator: " + std::to_string(segmaps.size()) +
                        " segmentation maps for " + std::to_string(data_.size()) + " images");
  }
  const std::size_t h = data_.height(), w = data_.width();
  const std::size_t op = gen_.operating_size(h);
  if (op % (std::size_t{1} << gen_.config().n_down) != 0 || gen_.operating_size(w) != op) {
    throw networks::ConfigError("train_generator: operating size " + std::to_string(op) +
                                " must be square and divisible by 2^n_down");
  }
  if (op < networks::DiscriminatorConfig::kMinInput ||
      h < (std::size_t{1} << config_.pyramid_levels)) {
    throw networks::ConfigError("train_generator: images of " + std::to_string(h) + "x" +
                                std::to_string(w) + " are too small for this configuration");
  }
  const std::size_t fh = gen_.feature_size(h), fw = gen_.feature_size(w);
  feature_segs_.clear();
  for (std::size_t i = 0; i < segmaps.size(); ++i) {
    if (segmaps[i].height != h || segmaps[i].width != w) {
      throw ContractError("train_generator: segmentation " + std::to_string(i) +
                          " does not match the image size");
    }
    feature_segs_.push_back(segmentation::rescale_segmentation(segmaps[i], fh, fw));
  }
  populated_classes_.clear();
  for (std::size_t c = 0; c < data_.class_index.size(); ++c) {
    if (!data_.class_index[c].empty()) populated_classes_.push_back(c);
  }
}

std::vector<std::size_t> GeneratorTrainer::sample_group(std::size_t& class_out) {
  class_out = populated_classes_[rng_.batches.below(populated_classes_.size())];
  const auto& members = data_.class_index[class_out];
  std::vector<std::size_t> rows;
  if (members.size() >= config_.n_mix) {
    for (std::size_t pick : rng_.batches.choose(members.size(), config_.n_mix)) {
      rows.push_back(members[pick]);
    }
  } else {
    for (std::size_t i = 0; i < config_.n_mix; ++i) {
      rows.push_back(members[rng_.batches.below(members.size())]);
    }
  }
  return rows;
}

StepRecord GeneratorTrainer::step() {
  StepRecord record;
  record.step = step_;
  record.epoch = step_ / config_.steps_per_epoch(data_.size());
  record.lr = lr_at_epoch(config_, record.epoch);

  std::vector<std::size_t> rows;
  std::vector<masking::MixingMask> masks;
  for (std::size_t g = 0; g < config_.groups_per_step; ++g) {
    std::size_t cls = 0;
    const auto group = sample_group(cls);
    record.classes.push_back(static_cast<int>(cls));
    std::vector<segmentation::SegmentationMap> segs;
    for (std::size_t r : group) segs.push_back(feature_segs_[r]);
    if (config_.seg_noise > 0) segs = masking::perturb_segmentation(segs, config_.seg_noise, rng_.masks);
    masks.push_back(masking::sample_segment_mask(segs, config_.p_select, rng_.masks));
    rows.insert(rows.end(), group.begin(), group.end());
  }
  const auto images = data_.gather(rows);
  const auto perceptual_rows =
      rng_.perceptual.choose(rows.size(), std::min(config_.perceptual_images, rows.size()));

  auto gen_params = tensors(gen_.parameters());
  auto disc_params = tensors(disc_.parameters());

  Tensor<float> mixed;
  {
    numerics::Tape<float> tape;
    GeneratorLossTerms<float> terms;
    for (auto& p : disc_params) p.set_requires_grad(false);
    {
      numerics::TapeScope<float> scope(tape);
      terms = generator_losses(gen_, disc_, images, config_.n_mix, masks, perceptual_rows,
                               config_.pyramid_levels, config_.weights);
    }
    tape.backward(terms.total);
    numerics::adam_step<float>(gen_params, gen_adam_, record.lr, config_.weight_decay);
    for (auto& p : disc_params) p.set_requires_grad(true);
    record.rec = terms.rec.item();
    record.per = terms.per.item();
    record.gdisc = terms.gdisc.item();
    record.total = terms.total.item();
    mixed = terms.mixed.detach();
  }
  {
    numerics::Tape<float> tape;
    Tensor<float> loss, d_real, d_fake;
    {
      numerics::TapeScope<float> scope(tape);
      d_real = disc_(images);
      d_fake = disc_(mixed);
      loss = loss_adversarial(d_real, d_fake, AdversarialSide::discriminator);
    }
    tape.backward(loss);
    numerics::adam_step<float>(disc_params, disc_adam_, record.lr, config_.weight_decay);
    record.disc = loss.item();
    record.d_real = mean_of(d_real);
    record.d_fake = mean_of(d_fake);
  }
  ++step_;
  return record;
}

CheckpointFile GeneratorTrainer::checkpoint() const {
  CheckpointFile file;
  nlohmann::json adam_g, adam_d;
  file.config = {{"kind", "generator-trainer"},
                 {"generator", gen_.config()},
                 {"discriminator", disc_.config()},
                 {"train", config_},
                 {"step", step_},
                 {"epoch", step_ / config_.steps_per_epoch(data_.size())},
                 {"image",
                  {{"channels", data_.channels()},
                   {"height", data_.height()},
                   {"width", data_.width()}}},
                 {"class_names", data_.class_names},
                 {"rng",
                  {{"batches", stream_json(rng_.batches)},
                   {"masks", stream_json(rng_.masks)},
                   {"perceptual", stream_json(rng_.perceptual)}}}};
  networks::append_parameters(file, prefixed(gen_.parameters(), "G/"));
  networks::append_parameters(file, prefixed(disc_.parameters(), "D/"));
  save_adam(file, "G", gen_.parameters(), gen_adam_, adam_g);
  save_adam(file, "D", disc_.parameters(), disc_adam_, adam_d);
  file.config["adam_steps"] = {{"G", adam_g}, {"D", adam_d}};
  return file;
}

CheckpointFile run_training(GeneratorTrainer& trainer, const TrainCallbacks& callbacks) {
  const std::size_t every = trainer.config().checkpoint_every;
  while (!trainer.finished()) {
    const auto record = trainer.step();
    if (callbacks.on_step) callbacks.on_step(record);
    if (every != 0 && callbacks.on_checkpoint && trainer.steps_done() % every == 0 &&
        !trainer.finished()) {
      callbacks.on_checkpoint(trainer.steps_done(), trainer.checkpoint());
    }
  }
  return trainer.checkpoint();
}

CheckpointFile train_generator(const classifier::LabeledDataset& data,
                               const std::vector<segmentation::SegmentationMap>& segmaps,
                               const networks::GeneratorConfig& gen_config,
                               const networks::DiscriminatorConfig& disc_config,
                               const TrainConfig& config, const TrainCallbacks& callbacks) {
  GeneratorTrainer trainer(data, segmaps, gen_config, disc_config, config);
  return run_training(trainer, callbacks);
}

networks::Generator<float> load_generator(const CheckpointFile& checkpoint) {
  if (checkpoint.config.value("kind", "") != "generator-trainer") {
    throw io::FormatError("checkpoint is not a generator training checkpoint");
  }
  RngStream unused(0);
  networks::Generator<float> gen(config_from<networks::GeneratorConfig>(checkpoint, "generator"),
                                 unused);
  auto params = prefixed(gen.parameters(), "G/");
  networks::restore_parameters(checkpoint, params);
  for (auto& p : gen.parameters()) p.tensor.set_requires_grad(false);
  return gen;
}

Tensor<float> generate_per_class(const networks::Generator<float>& generator,
                                 const classifier::LabeledDataset& data,
                                 const std::vector<segmentation::SegmentationMap>& segmaps,
                                 std::size_t n_mix, double p_select, std::size_t per_class,
                                 RngStream& rng) {
  if (n_mix == 0) throw ContractError("generate: n_mix must be >= 1");
  if (segmaps.size() != data.size()) {
    throw ContractError("generate: " + std::to_string(segmaps.size()) + " segmentation maps for " +
                        std::to_string(data.size()) + " images");
  }
  const std::size_t fh = generator.feature_size(data.height());
  const std::size_t fw = generator.feature_size(data.width());
  std::vector<Tensor<float>> out;
  for (std::size_t c = 0; c < data.num_classes(); ++c) {
    const auto& members = data.class_index[c];
    if (members.empty()) throw ContractError("generate: class '" + data.class_names[c] + "' has no images");
    for (std::size_t k = 0; k < per_class; ++k) {
      std::vector<std::size_t> rows;
      if (members.size() >= n_mix) {
        for (std::size_t pick : rng.choose(members.size(), n_mix)) rows.push_back(members[pick]);
      } else {
        for (std::size_t i = 0; i < n_mix; ++i) rows.push_back(members[rng.below(members.size())]);
      }
      std::vector<segmentation::SegmentationMap> segs;
      for (auto r : rows) segs.push_back(segmentation::rescale_segmentation(segmaps[r], fh, fw));
      const auto mask = masking::sample_segment_mask(segs, p_select, rng);
      out.push_back(generator.generate(data.gather(rows), mask));
    }
  }
  if (out.empty()) return Tensor<float>({0, data.channels(), data.height(), data.width()});
  return numerics::concat<float>(out);
}

}  // namespace hydramix::training
