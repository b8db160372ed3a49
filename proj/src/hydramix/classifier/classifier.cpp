#include "hydramix/classifier/classifier.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "hydramix/io/binary.hpp"
#include "hydramix/numerics/optim.hpp"

namespace hydramix::classifier {

using networks::ConfigError;
using numerics::Activation;
using numerics::ContractError;

void ClassifierConfig::validate() const {
  if (widths.empty()) throw ConfigError("classifier: widths must not be empty");
  for (auto w : widths)
    if (w == 0) throw ConfigError("classifier: every width must be >= 1");
  if (epochs == 0) throw ConfigError("classifier: epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("classifier: batch_size must be >= 1");
  if (!(lr > 0)) throw ConfigError("classifier: lr must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("classifier: momentum must lie in [0, 1)");
  if (weight_decay < 0) throw ConfigError("classifier: weight_decay must be >= 0");
  if (p_gen && !(*p_gen >= 0 && *p_gen <= 1)) throw ConfigError("classifier: p_gen must lie in [0, 1]");
  if (augment == AugmentKind::none && p_gen && *p_gen > 0) {
    throw ConfigError("classifier: p_gen > 0 requires an augmentation other than 'none'");
  }
  if (mix.n_mix < 2) throw ConfigError("classifier: n_mix must be >= 2");
  if (!(mix.mixup_alpha > 0) || !(mix.dirichlet_alpha > 0)) {
    throw ConfigError("classifier: mixing concentrations must be positive");
  }
  if (mix.grid_cells == 0) throw ConfigError("classifier: grid_cells must be >= 1");
  if (!(mix.p_select >= 0 && mix.p_select <= 1)) throw ConfigError("classifier: p_select must lie in [0, 1]");
}

void to_json(nlohmann::json& j, const ClassifierConfig& c) {
  j = {{"widths", c.widths},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"lr", c.lr},
       {"cosine", c.cosine},
       {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},
       {"p_gen", c.effective_p_gen()},
       {"augment", to_string(c.augment)},
       {"n_mix", c.mix.n_mix},
       {"mixup_alpha", c.mix.mixup_alpha},
       {"dirichlet_alpha", c.mix.dirichlet_alpha},
       {"grid_cells", c.mix.grid_cells},
       {"p_select", c.mix.p_select},
       {"basic_augment", c.basic_augment},
       {"crop_padding", c.crop_padding},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ClassifierConfig& c) {
  c = ClassifierConfig{};
  for (auto& [key, value] : j.items()) {
    if (key == "widths") c.widths = value.get<std::vector<std::size_t>>();
    else if (key == "epochs") c.epochs = value.get<std::size_t>();
    else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
    else if (key == "lr") c.lr = value.get<double>();
    else if (key == "cosine") c.cosine = value.get<bool>();
    else if (key == "momentum") c.momentum = value.get<double>();
    else if (key == "weight_decay") c.weight_decay = value.get<double>();
    else if (key == "p_gen") c.p_gen = value.get<double>();
    else if (key == "augment") c.augment = parse_augment_kind(value.get<std::string>());
    else if (key == "n_mix") c.mix.n_mix = value.get<std::size_t>();
    else if (key == "mixup_alpha") c.mix.mixup_alpha = value.get<double>();
    else if (key == "dirichlet_alpha") c.mix.dirichlet_alpha = value.get<double>();
    else if (key == "grid_cells") c.mix.grid_cells = value.get<std::size_t>();
    else if (key == "p_select") c.mix.p_select = value.get<double>();
    else if (key == "basic_augment") c.basic_augment = value.get<bool>();
    else if (key == "crop_padding") c.crop_padding = value.get<std::size_t>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else throw ConfigError("classifier config: unknown key '" + key + "'");
  }
  c.validate();
}

namespace {

Tensor<float> uniform_param(numerics::Shape shape, double bound, RngStream& rng) {
  std::vector<float> v(numerics::shape_numel(shape));
  for (auto& x : v) x = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
  Tensor<float> t(std::move(shape), std::move(v));
  t.set_requires_grad(true);
  return t;
}

}  // namespace

SmallCnn::SmallCnn(std::vector<std::size_t> widths, std::size_t channels, std::size_t height,
                   std::size_t width, std::size_t num_classes, RngStream& init)
    : widths_(std::move(widths)),
      channels_(channels),
      height_(height),
      width_(width),
      num_classes_(num_classes) {
  if (num_classes_ < 2) throw ConfigError("classifier: needs at least two classes");
  if (widths_.empty()) throw ConfigError("classifier: widths must not be empty");
  const std::size_t shrink = std::size_t{1} << widths_.size();
  if (height_ < shrink || width_ < shrink) {
    throw ConfigError("classifier: " + std::to_string(widths_.size()) + " pooling blocks need images of at least " +
                      std::to_string(shrink) + "x" + std::to_string(shrink));
  }
  std::size_t in = channels_;
  for (std::size_t b = 0; b < widths_.size(); ++b) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * 9));
    networks::ConvLayer<float> conv;
    conv.weight = uniform_param({widths_[b], in, 3, 3}, bound, init);
    conv.bias = uniform_param({widths_[b]}, bound, init);
    conv.stride = 1;
    conv.padding = 1;
    const std::string name = "block" + std::to_string(b);
    params_.push_back({name + ".weight", conv.weight});
    params_.push_back({name + ".bias", conv.bias});
    convs_.push_back(conv);
    in = widths_[b];
  }
  const std::size_t features = in * (height_ >> widths_.size()) * (width_ >> widths_.size());
  const double bound = 1.0 / std::sqrt(static_cast<double>(features));
  head_weight_ = uniform_param({num_classes_, features}, bound, init);
  head_bias_ = uniform_param({num_classes_}, bound, init);
  params_.push_back({"head.weight", head_weight_});
  params_.push_back({"head.bias", head_bias_});
}

Tensor<float> SmallCnn::operator()(const Tensor<float>& images) const {
  if (images.rank() != 4 || images.dim(1) != channels_ || images.dim(2) != height_ ||
      images.dim(3) != width_) {
    throw numerics::DimensionError("classifier: expected N x " + std::to_string(channels_) + " x " +
                                   std::to_string(height_) + " x " + std::to_string(width_) +
                                   " input, got " + numerics::shape_str(images.shape()));
  }
  Tensor<float> x = images;
  for (const auto& conv : convs_) {
    x = numerics::instance_norm(conv(x), 1e-5f);
    x = numerics::max_pool2d(numerics::activation(x, Activation::relu()), 2);
  }
  x = numerics::reshape(x, {x.dim(0), x.size() / x.dim(0)});
  return numerics::linear(x, head_weight_, head_bias_);
}

nlohmann::json SmallCnn::describe() const {
  return {{"widths", widths_},   {"channels", channels_},       {"height", height_},
          {"width", width_},     {"num_classes", num_classes_}};
}

nlohmann::json ClassifierStep::to_json() const {
  return {{"step", step}, {"lr", lr}, {"loss", loss}, {"generated", generated}};
}

std::size_t classifier_total_steps(const ClassifierConfig& config, std::size_t dataset_size) {
  return config.epochs * std::max<std::size_t>(1, (dataset_size + config.batch_size - 1) / config.batch_size);
}

double cosine_lr(const ClassifierConfig& config, std::size_t step, std::size_t total_steps) {
  if (!config.cosine || total_steps == 0) return config.lr;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return 0.5 * config.lr * (1.0 + std::cos(std::numbers::pi * t));
}

Tensor<float> basic_augment(const Tensor<float>& images, std::size_t padding, RngStream& rng) {
  const std::size_t n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  std::vector<float> out(images.size(), 0.0f);
  const auto src = images.values();
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  for (std::size_t i = 0; i < n; ++i) {
    const auto dy = static_cast<std::ptrdiff_t>(rng.below(2 * padding + 1)) - pad;
    const auto dx = static_cast<std::ptrdiff_t>(rng.below(2 * padding + 1)) - pad;
    const bool flip = rng.bernoulli(0.5);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (i * c + ch) * h * w;
      for (std::size_t y = 0; y < h; ++y) {
        const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t x = 0; x < w; ++x) {
          const std::size_t cx = flip ? w - 1 - x : x;
          const auto sx = static_cast<std::ptrdiff_t>(cx) + dx;
          if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
          out[base + y * w + x] = src[base + static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)];
        }
      }
    }
  }
  return Tensor<float>(images.shape(), std::move(out));
}

ClassifierRun train_classifier(const LabeledDataset& train, Augmenter* augmenter,
                               const ClassifierConfig& config,
                               const std::function<void(const ClassifierStep&)>& on_step) {
  config.validate();
  train.validate();
  if (train.size() == 0) throw ContractError("train_classifier: empty dataset");
  const double p_gen = config.effective_p_gen();
  if (config.augment != AugmentKind::none) {
    if (augmenter == nullptr) {
      throw ContractError("train_classifier: augmentation '" + to_string(config.augment) +
                          "' requested but no augmenter was provided");
    }
    if (augmenter->kind() != config.augment) {
      throw ContractError("train_classifier: augmenter kind '" + to_string(augmenter->kind()) +
                          "' does not match configured '" + to_string(config.augment) + "'");
    }
  }

  const RngStream root(config.seed);
  RngStream init = root.split("init");
  RngStream batches = root.split("batches");
  RngStream pgen = root.split("pgen");
  RngStream aug = root.split("augment");
  RngStream mix = root.split("mix");

  ClassifierRun run{SmallCnn(config.widths, train.channels(), train.height(), train.width(),
                             train.num_classes(), init)};
  auto params = networks::tensors_of(run.model.parameters());
  std::vector<std::vector<float>> velocity;
  for (const auto& p : params) velocity.emplace_back(p.size(), 0.0f);

  const std::size_t total = classifier_total_steps(config, train.size());
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  for (std::size_t step = 0; step < total; ++step) {
    ClassifierStep record;
    record.step = step;
    record.lr = cosine_lr(config, step, total);
    record.generated = p_gen > 0 && pgen.uniform() < p_gen;

    Tensor<float> x, targets;
    std::vector<int> labels;
    if (record.generated) {
      auto batch = augmenter->generate(config.batch_size, mix);
      x = batch.images;
      targets = batch.targets;
      ++run.generated_steps;
    } else {
      std::vector<std::size_t> rows;
      while (rows.size() < config.batch_size) {
        if (cursor == order.size()) {
          order = batches.permutation(train.size());
          cursor = 0;
        }
        rows.push_back(order[cursor++]);
      }
      x = train.gather(rows);
      for (auto r : rows) labels.push_back(train.labels[r]);
      ++run.original_steps;
    }
    if (config.basic_augment) x = basic_augment(x, config.crop_padding, aug);

    numerics::Tape<float> tape;
    Tensor<float> loss;
    {
      numerics::TapeScope<float> scope(tape);
      const auto logits = run.model(x);
      loss = record.generated ? numerics::soft_cross_entropy(logits, targets)
                              : numerics::softmax_cross_entropy<float>(logits, labels);
    }
    tape.backward(loss);
    numerics::sgd_momentum_step<float>(params, velocity, record.lr, config.momentum,
                                       config.weight_decay);
    record.loss = loss.item();
    if (on_step) on_step(record);
  }
  return run;
}

EvalResult score_predictions(std::span<const int> predictions, std::span<const int> labels,
                             std::size_t num_classes) {
  if (predictions.size() != labels.size()) throw ContractError("evaluate: prediction count mismatch");
  EvalResult r;
  r.total = labels.size();
  std::vector<std::size_t> hit(num_classes, 0), count(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    ++count.at(y);
    if (predictions[i] == labels[i]) {
      ++hit[y];
      ++r.correct;
    }
  }
  r.accuracy = r.total == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.total);
  for (std::size_t c = 0; c < num_classes; ++c) {
    r.per_class.push_back(count[c] == 0 ? std::numeric_limits<double>::quiet_NaN()
                                        : static_cast<double>(hit[c]) / static_cast<double>(count[c]));
  }
  r.predictions.assign(predictions.begin(), predictions.end());
  return r;
}

EvalResult evaluate(const SmallCnn& model, const LabeledDataset& test) {
  test.validate();
  if (test.num_classes() != model.num_classes()) {
    throw ContractError("evaluate: model has " + std::to_string(model.num_classes()) +
                        " classes, test set has " + std::to_string(test.num_classes()));
  }
  constexpr std::size_t kChunk = 64;
  std::vector<int> predictions;
  for (std::size_t start = 0; start < test.size(); start += kChunk) {
    std::vector<std::size_t> rows;
    for (std::size_t i = start; i < std::min(test.size(), start + kChunk); ++i) rows.push_back(i);
    const auto logits = model(test.gather(rows));
    const std::size_t k = logits.dim(1);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c)
        if (logits[r * k + c] > logits[r * k + best]) best = c;
      predictions.push_back(static_cast<int>(best));
    }
  }
  return score_predictions(predictions, test.labels, test.num_classes());
}

nlohmann::json EvalResult::to_json(const std::vector<std::string>& class_names) const {
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
    per[name] = std::isnan(per_class[c]) ? nlohmann::json(nullptr) : nlohmann::json(per_class[c]);
  }
  return {{"accuracy", accuracy}, {"correct", correct}, {"total", total}, {"per_class", per}};
}

networks::CheckpointFile classifier_checkpoint(const SmallCnn& model,
                                               const std::vector<std::string>& class_names) {
  networks::CheckpointFile file;
  file.config = {{"kind", "classifier"}, {"model", model.describe()}, {"class_names", class_names}};
  networks::append_parameters(file, model.parameters());
  return file;
}

SmallCnn load_classifier(const networks::CheckpointFile& file) {
  if (file.config.value("kind", "") != "classifier") {
    throw io::FormatError("checkpoint is not a classifier checkpoint");
  }
  const auto& m = file.config.at("model");
  RngStream unused(0);
  SmallCnn model(m.at("widths").get<std::vector<std::size_t>>(), m.at("channels").get<std::size_t>(),
                 m.at("height").get<std::size_t>(), m.at("width").get<std::size_t>(),
                 m.at("num_classes").get<std::size_t>(), unused);
  networks::restore_parameters(file, model.parameters());
  for (auto& p : model.parameters()) p.tensor.set_requires_grad(false);
  return model;
}

}  // namespace hydramix::classifier
