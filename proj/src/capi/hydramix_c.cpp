#include "hydramix/hydramix.h"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <string>

#include "json.hpp"

#include "hydramix/classifier/classifier.hpp"
#include "hydramix/cse/cse.hpp"
#include "hydramix/io/binary.hpp"
#include "hydramix/io/dataset_io.hpp"
#include "hydramix/io/plotdata.hpp"
#include "hydramix/io/png.hpp"
#include "hydramix/io/run_config.hpp"
#include "hydramix/io/synthetic.hpp"
#include "hydramix/training/gradcheck.hpp"
#include "hydramix/training/trainer.hpp"

using namespace hydramix;
using nlohmann::json;

struct hm_dataset {
  classifier::LabeledDataset data;
};

struct hm_generator {
  networks::Generator<float> gen;
};

struct hm_classifier {
  classifier::SmallCnn model;
  std::vector<std::string> class_names;
};

namespace {

thread_local std::string last_error;

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

template <typename F>
hm_status guard(F&& body) {
  try {
    last_error.clear();
    body();
    return HM_OK;
  } catch (const ArgumentError& e) {
    last_error = e.what();
    return HM_ERR_INVALID_ARGUMENT;
  } catch (const io::FormatError& e) {
    last_error = e.what();
    return HM_ERR_FORMAT;
  } catch (const io::IoError& e) {
    last_error = e.what();
    return HM_ERR_IO;
  } catch (const json::exception& e) {
    last_error = std::string("invalid JSON value: ") + e.what();
    return HM_ERR_VALIDATION;
  } catch (const std::logic_error& e) {
    // ContractError, DimensionError, ConfigError, and missing-id lookups.
    last_error = e.what();
    return HM_ERR_VALIDATION;
  } catch (const std::exception& e) {
    last_error = e.what();
    return HM_ERR_RUNTIME;
  } catch (...) {
    last_error = "unknown error";
    return HM_ERR_RUNTIME;
  }
}

template <typename T>
void require(const T* p, const char* name) {
  if (!p) throw ArgumentError(std::string(name) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_string(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

io::RunConfig parse_config(const char* text) {
  if (!text || !*text) return io::run_config_from_json(json::object());
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw numerics::ContractError(std::string("config is not valid JSON: ") + e.what());
  }
  return io::run_config_from_json(j);
}

/// Channel counts of both networks follow the data.
void fit_channels(io::RunConfig& cfg, const classifier::LabeledDataset& data) {
  cfg.generator.in_channels = data.channels();
  cfg.discriminator.in_channels = data.channels();
}

std::vector<segmentation::SegmentationMap> segments_for(const classifier::LabeledDataset& data,
                                                        const char* path, const io::RunConfig& cfg) {
  if (!path || !*path) return io::segment_dataset(data, cfg.segmentation.resolve(data.height(), data.width()));
  auto segs = io::load_segmentations(path);
  if (segs.size() != data.size()) {
    throw numerics::ContractError(std::string(path) + " holds " + std::to_string(segs.size()) +
                                  " segmentations for " + std::to_string(data.size()) + " images");
  }
  for (const auto& s : segs) {
    if (s.height != data.height() || s.width != data.width()) {
      throw numerics::ContractError(std::string(path) + ": segmentation size does not match the images");
    }
  }
  return segs;
}

}  // namespace

extern "C" {

const char* hm_version(void) { return "0.1.0"; }

const char* hm_last_error(void) { return last_error.c_str(); }

const char* hm_status_name(hm_status status) {
  switch (status) {
    case HM_OK: return "ok";
    case HM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case HM_ERR_VALIDATION: return "validation error";
    case HM_ERR_IO: return "i/o error";
    case HM_ERR_FORMAT: return "format error";
    case HM_ERR_RUNTIME: return "runtime error";
  }
  return "unknown status";
}

void hm_string_free(char* text) { std::free(text); }

hm_status hm_config_resolve(const char* config_json, char** resolved_json) {
  return guard([&] {
    require(resolved_json, "resolved_json");
    *resolved_json = dup_string(io::run_config_to_json(parse_config(config_json)).dump(2));
  });
}

hm_status hm_dataset_load(const char* path, hm_dataset** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new hm_dataset{io::load_dataset_path(path)};
  });
}

hm_status hm_dataset_synthetic(const char* spec_json, const char* split, hm_dataset** out) {
  return guard([&] {
    require(split, "split");
    require(out, "out");
    io::SyntheticSpec spec;
    if (spec_json && *spec_json) {
      const json doc = json::parse(spec_json);
      for (auto& [key, v] : doc.items()) {
        if (key == "classes") spec.classes = v.get<std::size_t>();
        else if (key == "per_class") spec.per_class = v.get<std::size_t>();
        else if (key == "size") spec.size = v.get<std::size_t>();
        else if (key == "channels") spec.channels = v.get<std::size_t>();
        else if (key == "parts") spec.parts = v.get<std::size_t>();
        else if (key == "noise") spec.noise = v.get<double>();
        else if (key == "shared_parts") spec.shared_parts = v.get<bool>();
        else if (key == "seed") spec.seed = v.get<std::uint64_t>();
        else throw numerics::ContractError("synthetic spec: unknown key '" + key + "'");
      }
    }
    *out = new hm_dataset{io::make_synthetic(spec, split)};
  });
}

hm_status hm_dataset_subsample(const hm_dataset* data, size_t per_class, uint64_t seed, hm_dataset** out) {
  return guard([&] {
    require(data, "data");
    require(out, "out");
    *out = new hm_dataset{classifier::subsample(data->data, per_class, seed)};
  });
}

hm_status hm_dataset_save_raw(const hm_dataset* data, const char* path) {
  return guard([&] {
    require(data, "data");
    require(path, "path");
    io::save_raw_dataset(path, data->data);
  });
}

hm_status hm_dataset_save_png_dir(const hm_dataset* data, const char* root) {
  return guard([&] {
    require(data, "data");
    require(root, "root");
    io::save_png_dir(root, data->data);
  });
}

hm_status hm_dataset_info(const hm_dataset* data, char** info_json) {
  return guard([&] {
    require(data, "data");
    require(info_json, "info_json");
    const auto& d = data->data;
    std::vector<std::size_t> counts;
    for (const auto& members : d.class_index) counts.push_back(members.size());
    const json j = {{"size", d.size()},       {"channels", d.channels()},  {"height", d.height()},
                    {"width", d.width()},     {"class_names", d.class_names}, {"class_counts", counts}};
    *info_json = dup_string(j.dump());
  });
}

void hm_dataset_free(hm_dataset* data) { delete data; }

hm_status hm_segment(const hm_dataset* data, const char* config_json, const char* out_path,
                     char** summary_json) {
  return guard([&] {
    require(data, "data");
    require(out_path, "out_path");
    const auto cfg = parse_config(config_json);
    const auto params = cfg.segmentation.resolve(data->data.height(), data->data.width());
    const auto segs = io::segment_dataset(data->data, params);
    io::save_segmentations(out_path, segs, params, data->data.ids);
    std::vector<std::size_t> counts;
    for (const auto& s : segs) counts.push_back(s.segment_count());
    put_string(summary_json, json{{"params", params}, {"images", segs.size()}, {"segment_counts", counts}}.dump());
  });
}

hm_status hm_train_generator(const hm_dataset* data, const char* segments_path, const char* config_json,
                             uint64_t seed, const char* resume_path, const char* checkpoint_out,
                             hm_log_fn log, void* user) {
  return guard([&] {
    require(data, "data");
    require(checkpoint_out, "checkpoint_out");
    auto cfg = parse_config(config_json);
    cfg.set_seed(seed);
    fit_channels(cfg, data->data);
    const auto segs = segments_for(data->data, segments_path, cfg);
    std::optional<training::GeneratorTrainer> trainer;
    if (resume_path && *resume_path) {
      trainer.emplace(data->data, segs, networks::load_checkpoint(resume_path));
    } else {
      trainer.emplace(data->data, segs, cfg.generator, cfg.discriminator, cfg.training);
    }
    training::TrainCallbacks callbacks;
    if (log) {
      callbacks.on_step = [&](const training::StepRecord& r) { log(r.to_json().dump().c_str(), user); };
    }
    const std::string out = checkpoint_out;
    callbacks.on_checkpoint = [&](std::size_t step, const networks::CheckpointFile& file) {
      networks::save_checkpoint(out + ".step" + std::to_string(step), file);
    };
    networks::save_checkpoint(out, training::run_training(*trainer, callbacks));
  });
}

hm_status hm_generator_load(const char* checkpoint_path, hm_generator** out) {
  return guard([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    *out = new hm_generator{training::load_generator(networks::load_checkpoint(checkpoint_path))};
  });
}

void hm_generator_free(hm_generator* generator) { delete generator; }

hm_status hm_generate(const hm_generator* generator, const hm_dataset* data, const char* segments_path,
                      const char* config_json, uint64_t seed, size_t per_class, const char* out_dir,
                      char** files_json) {
  return guard([&] {
    require(generator, "generator");
    require(data, "data");
    require(out_dir, "out_dir");
    const auto cfg = parse_config(config_json);
    const auto& d = data->data;
    if (generator->gen.config().in_channels != d.channels()) {
      throw numerics::ContractError("generator expects " + std::to_string(generator->gen.config().in_channels) +
                                    " channels, dataset has " + std::to_string(d.channels()));
    }
    const auto segs = segments_for(d, segments_path, cfg);
    RngStream rng = RngStream(seed).split("generate");
    const auto images = training::generate_per_class(generator->gen, d, segs, cfg.training.n_mix,
                                                     cfg.training.p_select, per_class, rng);
    std::filesystem::create_directories(out_dir);
    json files = json::array();
    std::size_t row = 0;
    for (std::size_t c = 0; c < d.num_classes(); ++c) {
      for (std::size_t k = 0; k < per_class; ++k, ++row) {
        const std::string name = d.class_names[c] + "_" + std::to_string(k) + ".png";
        io::write_png(std::filesystem::path(out_dir) / name, io::from_tensor(numerics::slice(images, row, row + 1)));
        files.push_back(name);
      }
    }
    put_string(files_json, files.dump());
  });
}

hm_status hm_train_classifier(const hm_dataset* train, const char* segments_path, const hm_generator* generator,
                              const char* config_json, uint64_t seed, const char* model_out, hm_log_fn log,
                              void* user, hm_classifier** model, char** summary_json) {
  return guard([&] {
    require(train, "train");
    auto cfg = parse_config(config_json);
    cfg.set_seed(seed);
    const auto& d = train->data;
    const auto kind = cfg.classifier.augment;
    std::unique_ptr<classifier::Augmenter> augmenter;
    if (kind == classifier::AugmentKind::hydramix) {
      if (!generator) throw numerics::ContractError("augment 'hydramix' needs a generator checkpoint");
      augmenter = classifier::make_generator_augmenter(generator->gen, d, segments_for(d, segments_path, cfg),
                                                       cfg.classifier.mix);
    } else if (kind != classifier::AugmentKind::none) {
      std::vector<segmentation::SegmentationMap> segs;
      if (classifier::needs_segmentation(kind)) segs = segments_for(d, segments_path, cfg);
      augmenter = classifier::make_pixel_augmenter(kind, d, std::move(segs), cfg.classifier.mix);
    }
    std::function<void(const classifier::ClassifierStep&)> on_step;
    if (log) {
      on_step = [&](const classifier::ClassifierStep& s) {
        json j = s.to_json();
        j["seed"] = seed;
        log(j.dump().c_str(), user);
      };
    }
    auto run = classifier::train_classifier(d, augmenter.get(), cfg.classifier, on_step);
    if (model_out && *model_out) {
      networks::save_checkpoint(model_out, classifier::classifier_checkpoint(run.model, d.class_names));
    }
    put_string(summary_json, json{{"seed", seed},
                                  {"augment", classifier::to_string(kind)},
                                  {"p_gen", cfg.classifier.effective_p_gen()},
                                  {"generated_steps", run.generated_steps},
                                  {"original_steps", run.original_steps}}
                                 .dump());
    if (model) *model = new hm_classifier{std::move(run.model), d.class_names};
  });
}

hm_status hm_classifier_load(const char* path, hm_classifier** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    const auto file = networks::load_checkpoint(path);
    auto model = classifier::load_classifier(file);
    auto names = file.config.at("class_names").get<std::vector<std::string>>();
    *out = new hm_classifier{std::move(model), std::move(names)};
  });
}

hm_status hm_classifier_save(const hm_classifier* model, const char* path) {
  return guard([&] {
    require(model, "model");
    require(path, "path");
    networks::save_checkpoint(path, classifier::classifier_checkpoint(model->model, model->class_names));
  });
}

hm_status hm_evaluate(const hm_classifier* model, const hm_dataset* test, char** result_json) {
  return guard([&] {
    require(model, "model");
    require(test, "test");
    require(result_json, "result_json");
    if (test->data.class_names != model->class_names) {
      throw numerics::ContractError("test classes differ from the classes the model was trained on");
    }
    *result_json = dup_string(classifier::evaluate(model->model, test->data).to_json(model->class_names).dump());
  });
}

void hm_classifier_free(hm_classifier* model) { delete model; }

hm_status hm_cse(const char* class_images_path, const char* synsets_path, const char* embeddings_path,
                 double tau, char** result_json, char** result_csv) {
  return guard([&] {
    require(class_images_path, "class_images_path");
    require(synsets_path, "synsets_path");
    require(embeddings_path, "embeddings_path");
    json j;
    try {
      j = json::parse(io::read_text_file(class_images_path));
    } catch (const json::parse_error& e) {
      throw io::FormatError(std::string(class_images_path) + ": " + e.what());
    }
    const auto per_class = j.get<std::map<std::string, std::vector<std::string>>>();
    const auto result = cse::cse_dataset(per_class, cse::load_synsets(synsets_path),
                                         cse::load_embeddings(embeddings_path), tau);
    put_string(result_json, result.to_json().dump(2));
    put_string(result_csv, result.to_csv());
  });
}

hm_status hm_gradcheck(uint64_t seed, char** report_json) {
  return guard([&] {
    require(report_json, "report_json");
    const auto start = std::chrono::steady_clock::now();
    const auto results = training::run_gradcheck_suite(seed, true);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json checks = json::array();
    bool passed = true;
    for (const auto& r : results) {
      passed = passed && r.passed();
      checks.push_back({{"name", r.name},
                        {"max_rel_error", r.max_rel_error},
                        {"tolerance", r.tolerance},
                        {"coordinates", r.coordinates},
                        {"skipped", r.skipped},
                        {"passed", r.passed()}});
    }
    *report_json = dup_string(json{{"passed", passed}, {"seconds", seconds}, {"checks", checks}}.dump(2));
  });
}

hm_status hm_plotdata(const char* const* paths, size_t count, char** csv) {
  return guard([&] {
    require(csv, "csv");
    if (count > 0) require(paths, "paths");
    std::vector<std::string> docs;
    for (std::size_t i = 0; i < count; ++i) {
      require(paths[i], "paths[i]");
      docs.push_back(io::read_text_file(paths[i]));
    }
    *csv = dup_string(io::plotdata_to_csv(docs));
  });
}

}  // extern "C"
