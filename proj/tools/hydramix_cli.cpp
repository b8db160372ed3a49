#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hydramix/hydramix.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

/// Carries an exit code out of a subcommand.
struct Failure {
  int code;
  std::string message;
};

int exit_code_for(hm_status s) {
  return (s == HM_ERR_VALIDATION || s == HM_ERR_INVALID_ARGUMENT) ? kExitValidation : kExitRuntime;
}

void check(hm_status s, const std::string& what) {
  if (s != HM_OK) throw Failure{exit_code_for(s), what + ": " + hm_status_name(s) + ": " + hm_last_error()};
}

/// Owns a string returned by the library.
struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { hm_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};
using Dataset = Handle<hm_dataset, hm_dataset_free>;
using GeneratorHandle = Handle<hm_generator, hm_generator_free>;
using ClassifierHandle = Handle<hm_classifier, hm_classifier_free>;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << text;
    if (!out) throw Failure{kExitRuntime, "cannot write " + tmp.string()};
  }
  fs::rename(tmp, path);
}

/// Appends JSON lines to a file (or nowhere when no path is given).
class LogSink {
 public:
  explicit LogSink(const std::string& path) {
    if (path.empty()) return;
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    out_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*out_) throw Failure{kExitRuntime, "cannot open log " + path};
  }
  static void callback(const char* line, void* self) {
    auto* sink = static_cast<LogSink*>(self);
    if (sink->out_) *sink->out_ << line << '\n';
  }
  hm_log_fn fn() { return out_ ? &LogSink::callback : nullptr; }

 private:
  std::unique_ptr<std::ofstream> out_;
};

/// --config file plus --set overrides, merged into one JSON tree.
struct ConfigOptions {
  std::string file;
  std::vector<std::string> sets;
  json overrides = json::object();

  void add(CLI::App* cmd) {
    cmd->add_option("--config", file, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "Override a config value, e.g. training.lr=0.001");
  }

  void override_value(const std::string& section, const std::string& key, json value) {
    overrides[section][key] = std::move(value);
  }

  std::string build() const {
    json base = json::object();
    if (!file.empty()) {
      std::ifstream in(file, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      try {
        base = json::parse(ss.str());
      } catch (const json::parse_error& e) {
        throw Failure{kExitValidation, file + ": " + e.what()};
      }
    }
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      const auto dot = s.find('.');
      if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        throw Failure{kExitValidation, "--set expects section.key=value, got '" + s + "'"};
      }
      const std::string section = s.substr(0, dot), key = s.substr(dot + 1, eq - dot - 1);
      const std::string raw = s.substr(eq + 1);
      json value;
      try {
        value = json::parse(raw);
      } catch (const json::parse_error&) {
        value = raw;
      }
      base[section][key] = value;
    }
    for (auto& [section, entries] : overrides.items()) {
      for (auto& [key, value] : entries.items()) base[section][key] = value;
    }
    const std::string text = base.dump();
    OwnedString resolved;
    check(hm_config_resolve(text.c_str(), &resolved.p), "config");
    return text;
  }
};

const char* opt_c_str(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

void load_dataset(const std::string& path, Dataset& out) {
  check(hm_dataset_load(path.c_str(), &out.p), "loading " + path);
}

json dataset_info(const hm_dataset* d) {
  OwnedString info;
  check(hm_dataset_info(d, &info.p), "dataset info");
  return json::parse(info.str());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HydraMix: segmentation-guided feature mixing for small-data image classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hm_version()));

  std::uint64_t seed = 0;
  auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", seed, "Random seed"); };

  // segment
  auto* segment = app.add_subcommand("segment", "Felzenszwalb segmentation of every image");
  std::string seg_data, seg_out;
  ConfigOptions seg_cfg;
  segment->add_option("--data", seg_data, "Dataset (manifest, raw file, or png directory)")->required();
  segment->add_option("--out", seg_out, "Output segmentation bundle")->required();
  std::optional<double> seg_k, seg_sigma;
  std::optional<int> seg_min;
  segment->add_option("--k", seg_k, "Merge threshold scale");
  segment->add_option("--sigma", seg_sigma, "Gaussian pre-smoothing");
  segment->add_option("--min-size", seg_min, "Minimum segment size in pixels");
  seg_cfg.add(segment);
  add_seed(segment);

  // train-gen
  auto* train_gen = app.add_subcommand("train-gen", "Train the feature-mixing generator");
  std::string tg_data, tg_segments, tg_out, tg_log, tg_resume;
  std::optional<std::size_t> tg_steps, tg_epochs;
  std::optional<double> tg_lr;
  ConfigOptions tg_cfg;
  train_gen->add_option("--data", tg_data, "Training dataset")->required();
  train_gen->add_option("--segments", tg_segments, "Segmentation bundle (default: segment in-process)");
  train_gen->add_option("--out", tg_out, "Output checkpoint")->required();
  train_gen->add_option("--log", tg_log, "JSON-lines step log");
  train_gen->add_option("--resume", tg_resume, "Continue from a trainer checkpoint")->check(CLI::ExistingFile);
  train_gen->add_option("--steps", tg_steps, "Stop after this many steps in total");
  train_gen->add_option("--epochs", tg_epochs, "Training epochs");
  train_gen->add_option("--lr", tg_lr, "Adam learning rate");
  tg_cfg.add(train_gen);
  add_seed(train_gen);

  // generate
  auto* generate = app.add_subcommand("generate", "Write mixed images per class from a generator checkpoint");
  std::string ge_ckpt, ge_data, ge_segments, ge_out;
  std::size_t ge_n = 10;
  ConfigOptions ge_cfg;
  generate->add_option("--checkpoint", ge_ckpt, "Generator checkpoint")->required()->check(CLI::ExistingFile);
  generate->add_option("--data", ge_data, "Source dataset")->required();
  generate->add_option("--segments", ge_segments, "Segmentation bundle (default: segment in-process)");
  generate->add_option("--n", ge_n, "Images per class");
  generate->add_option("--out-dir", ge_out, "Output directory")->required();
  ge_cfg.add(generate);
  add_seed(generate);

  // train-cls
  auto* train_cls = app.add_subcommand("train-cls", "Train classifiers over one or more seeds");
  std::string tc_train, tc_test, tc_segments, tc_generator, tc_out, tc_log, tc_model_dir, tc_augment;
  std::optional<double> tc_pgen;
  std::optional<std::size_t> tc_epochs, tc_npc;
  std::vector<std::uint64_t> tc_seeds;
  ConfigOptions tc_cfg;
  train_cls->add_option("--train", tc_train, "Training dataset")->required();
  train_cls->add_option("--test", tc_test, "Test dataset for per-seed accuracy");
  train_cls->add_option("--segments", tc_segments, "Segmentation bundle of the training set");
  train_cls->add_option("--generator", tc_generator, "Generator checkpoint for hydramix")
      ->check(CLI::ExistingFile);
  train_cls->add_option("--augment", tc_augment, "none, mixup, mixupn, gridmix, segmix, nmix, hydramix");
  train_cls->add_option("--p-gen", tc_pgen, "Probability of a generated batch");
  train_cls->add_option("--epochs", tc_epochs, "Classifier epochs");
  train_cls->add_option("--n-per-class", tc_npc, "Subsample this many training images per class and seed");
  train_cls->add_option("--seeds", tc_seeds, "Seeds to run (default: --seed)");
  train_cls->add_option("--out", tc_out, "Results JSON")->required();
  train_cls->add_option("--log", tc_log, "JSON-lines step log");
  train_cls->add_option("--model-dir", tc_model_dir, "Directory for model and generator checkpoints");
  tc_cfg.add(train_cls);
  add_seed(train_cls);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a classifier checkpoint");
  std::string ev_model, ev_data, ev_out;
  eval->add_option("--model", ev_model, "Classifier checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", ev_data, "Test dataset")->required();
  eval->add_option("--out", ev_out, "Result JSON (default: stdout)");
  add_seed(eval);

  // cse
  auto* cse = app.add_subcommand("cse", "CLIP synset entropy of image sets");
  std::string cs_images, cs_synsets, cs_embeddings, cs_out, cs_csv;
  std::optional<double> cs_tau;
  ConfigOptions cs_cfg;
  cse->add_option("--class-images", cs_images, "JSON object: class id -> image ids")->required()->check(CLI::ExistingFile);
  cse->add_option("--synsets", cs_synsets, "Synset JSON file")->required()->check(CLI::ExistingFile);
  cse->add_option("--embeddings", cs_embeddings, "Embedding file")->required()->check(CLI::ExistingFile);
  cse->add_option("--tau", cs_tau, "Softmax temperature");
  cse->add_option("--out", cs_out, "Result JSON (default: stdout)");
  cse->add_option("--csv", cs_csv, "Result CSV");
  cs_cfg.add(cse);
  add_seed(cse);

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  std::string gc_out;
  gradcheck->add_option("--out", gc_out, "Report JSON");
  add_seed(gradcheck);

  // plotdata
  auto* plotdata = app.add_subcommand("plotdata", "Convert logs or result files to CSV");
  std::vector<std::string> pd_inputs;
  std::string pd_out;
  plotdata->add_option("inputs", pd_inputs, "JSON-lines logs or result JSON files")->required()->check(CLI::ExistingFile);
  plotdata->add_option("--out", pd_out, "CSV output (default: stdout)");
  add_seed(plotdata);

  // make-synthetic
  auto* synth = app.add_subcommand("make-synthetic", "Write the parametric parts dataset");
  std::string sy_out, sy_split = "train", sy_format = "raw";
  std::size_t sy_classes = 3, sy_per_class = 20, sy_size = 24, sy_parts = 3;
  double sy_noise = 0.15;
  bool sy_shared = false;
  synth->add_option("--out", sy_out, "Output raw file or png directory")->required();
  synth->add_option("--split", sy_split, "Split name; different names give independent draws");
  synth->add_option("--format", sy_format, "raw or png")->check(CLI::IsMember({"raw", "png"}));
  synth->add_option("--classes", sy_classes, "Number of classes");
  synth->add_option("--per-class", sy_per_class, "Images per class");
  synth->add_option("--size", sy_size, "Image side length");
  synth->add_option("--parts", sy_parts, "Parts per image");
  synth->add_option("--noise", sy_noise, "Background noise amplitude");
  synth->add_flag("--shared-parts", sy_shared, "Neighbouring classes share a part type");
  add_seed(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitValidation;
  }

  try {
    if (segment->parsed()) {
      if (seg_k) seg_cfg.override_value("segmentation", "k", *seg_k);
      if (seg_sigma) seg_cfg.override_value("segmentation", "sigma", *seg_sigma);
      if (seg_min) seg_cfg.override_value("segmentation", "min_size", *seg_min);
      const auto config = seg_cfg.build();
      Dataset data;
      load_dataset(seg_data, data);
      OwnedString summary;
      check(hm_segment(data.p, config.c_str(), seg_out.c_str(), &summary.p), "segment");
      const auto s = json::parse(summary.str());
      std::cout << "segmented " << s["images"] << " images into " << seg_out << "\n";
    } else if (train_gen->parsed()) {
      if (tg_steps) tg_cfg.override_value("training", "max_steps", *tg_steps);
      if (tg_epochs) tg_cfg.override_value("training", "epochs", *tg_epochs);
      if (tg_lr) tg_cfg.override_value("training", "lr", *tg_lr);
      const auto config = tg_cfg.build();
      Dataset data;
      load_dataset(tg_data, data);
      LogSink log(tg_log);
      check(hm_train_generator(data.p, opt_c_str(tg_segments), config.c_str(), seed, opt_c_str(tg_resume),
                               tg_out.c_str(), log.fn(), &log),
            "train-gen");
      std::cout << "wrote " << tg_out << "\n";
    } else if (generate->parsed()) {
      const auto config = ge_cfg.build();
      Dataset data;
      load_dataset(ge_data, data);
      GeneratorHandle gen;
      check(hm_generator_load(ge_ckpt.c_str(), &gen.p), "loading " + ge_ckpt);
      OwnedString files;
      check(hm_generate(gen.p, data.p, opt_c_str(ge_segments), config.c_str(), seed, ge_n, ge_out.c_str(),
                        &files.p),
            "generate");
      std::cout << "wrote " << json::parse(files.str()).size() << " images to " << ge_out << "\n";
    } else if (train_cls->parsed()) {
      if (!tc_augment.empty()) tc_cfg.override_value("classifier", "augment", tc_augment);
      if (tc_pgen) tc_cfg.override_value("classifier", "p_gen", *tc_pgen);
      if (tc_epochs) tc_cfg.override_value("classifier", "epochs", *tc_epochs);
      const auto config = tc_cfg.build();
      const auto resolved = [&] {
        OwnedString r;
        check(hm_config_resolve(config.c_str(), &r.p), "config");
        return json::parse(r.str());
      }();
      const std::string augment = resolved["classifier"]["augment"];
      if (tc_seeds.empty()) tc_seeds.push_back(seed);
      if (tc_npc && !tc_segments.empty()) {
        throw Failure{kExitValidation, "--segments cannot be combined with --n-per-class"};
      }
      const fs::path work = tc_model_dir.empty() ? fs::path(tc_out).parent_path() : fs::path(tc_model_dir);

      Dataset pool, test;
      load_dataset(tc_train, pool);
      if (!tc_test.empty()) load_dataset(tc_test, test);
      GeneratorHandle shared_gen;
      if (!tc_generator.empty()) check(hm_generator_load(tc_generator.c_str(), &shared_gen.p), "loading generator");

      LogSink log(tc_log);
      json runs = json::array();
      std::vector<double> accuracies;
      for (const auto s : tc_seeds) {
        Dataset sub;
        const hm_dataset* train = pool.p;
        if (tc_npc) {
          check(hm_dataset_subsample(pool.p, *tc_npc, s, &sub.p), "subsample");
          train = sub.p;
        }
        GeneratorHandle own_gen;
        const hm_generator* gen = shared_gen.p;
        if (augment == "hydramix" && !gen) {
          const auto ckpt = (work / ("generator_seed" + std::to_string(s) + ".hmck")).string();
          if (!work.empty()) fs::create_directories(work);
          check(hm_train_generator(train, opt_c_str(tc_segments), config.c_str(), s, nullptr, ckpt.c_str(),
                                   nullptr, nullptr),
                "train-gen for seed " + std::to_string(s));
          check(hm_generator_load(ckpt.c_str(), &own_gen.p), "loading generator");
          gen = own_gen.p;
        }
        std::string model_path;
        if (!tc_model_dir.empty()) {
          fs::create_directories(tc_model_dir);
          model_path = (fs::path(tc_model_dir) / ("classifier_seed" + std::to_string(s) + ".hmck")).string();
        }
        ClassifierHandle model;
        OwnedString summary;
        check(hm_train_classifier(train, opt_c_str(tc_segments), gen, config.c_str(), s, opt_c_str(model_path),
                                  log.fn(), &log, &model.p, &summary.p),
              "train-cls for seed " + std::to_string(s));
        json run = json::parse(summary.str());
        if (test.p) {
          OwnedString result;
          check(hm_evaluate(model.p, test.p, &result.p), "eval");
          const auto r = json::parse(result.str());
          run["accuracy"] = r["accuracy"];
          run["per_class"] = r["per_class"];
          accuracies.push_back(r["accuracy"].get<double>());
          std::cout << "seed " << s << ": accuracy " << r["accuracy"].get<double>() << "\n";
        }
        runs.push_back(run);
      }
      json results = {{"augment", augment},
                      {"p_gen", runs.empty() ? json() : runs[0]["p_gen"]},
                      {"n_per_class", tc_npc ? json(*tc_npc) : json()},
                      {"seeds", tc_seeds},
                      {"config", resolved},
                      {"runs", runs}};
      if (!accuracies.empty()) {
        double mean = 0;
        for (double a : accuracies) mean += a;
        mean /= static_cast<double>(accuracies.size());
        results["accuracies"] = accuracies;
        results["mean"] = mean;
        results["std"] = sample_std(accuracies);
        std::cout << "mean accuracy " << mean << " (std " << sample_std(accuracies) << ")\n";
      }
      write_text(tc_out, results.dump(2) + "\n");
    } else if (eval->parsed()) {
      Dataset data;
      load_dataset(ev_data, data);
      ClassifierHandle model;
      check(hm_classifier_load(ev_model.c_str(), &model.p), "loading " + ev_model);
      OwnedString result;
      check(hm_evaluate(model.p, data.p, &result.p), "eval");
      const auto text = json::parse(result.str()).dump(2) + "\n";
      if (ev_out.empty()) std::cout << text;
      else write_text(ev_out, text);
    } else if (cse->parsed()) {
      if (cs_tau) cs_cfg.override_value("cse", "tau", *cs_tau);
      const auto resolved = json::parse([&] {
        OwnedString r;
        check(hm_config_resolve(cs_cfg.build().c_str(), &r.p), "config");
        return r.str();
      }());
      OwnedString js, csv;
      check(hm_cse(cs_images.c_str(), cs_synsets.c_str(), cs_embeddings.c_str(),
                   resolved["cse"]["tau"].get<double>(), &js.p, &csv.p),
            "cse");
      if (cs_out.empty()) std::cout << js.str() << "\n";
      else write_text(cs_out, js.str() + "\n");
      if (!cs_csv.empty()) write_text(cs_csv, csv.str());
    } else if (gradcheck->parsed()) {
      OwnedString report;
      check(hm_gradcheck(seed, &report.p), "gradcheck");
      const auto r = json::parse(report.str());
      for (const auto& c : r["checks"]) {
        std::printf("%-24s max_rel_error %.3e  tolerance %.0e  coords %4zu  skipped %3zu  %s\n",
                    c["name"].get<std::string>().c_str(), c["max_rel_error"].get<double>(),
                    c["tolerance"].get<double>(), c["coordinates"].get<std::size_t>(),
                    c["skipped"].get<std::size_t>(),
                    c["passed"].get<bool>() ? "ok" : "FAIL");
      }
      std::printf("%s in %.2f s\n", r["passed"].get<bool>() ? "all checks passed" : "gradient check FAILED",
                  r["seconds"].get<double>());
      if (!gc_out.empty()) write_text(gc_out, report.str() + "\n");
      if (!r["passed"].get<bool>()) return kExitRuntime;
    } else if (plotdata->parsed()) {
      std::vector<const char*> paths;
      for (const auto& p : pd_inputs) paths.push_back(p.c_str());
      OwnedString csv;
      check(hm_plotdata(paths.data(), paths.size(), &csv.p), "plotdata");
      if (pd_out.empty()) std::cout << csv.str();
      else write_text(pd_out, csv.str());
    } else if (synth->parsed()) {
      const json spec = {{"classes", sy_classes}, {"per_class", sy_per_class}, {"size", sy_size},
                         {"parts", sy_parts},     {"noise", sy_noise},         {"shared_parts", sy_shared},
                         {"seed", seed}};
      Dataset data;
      check(hm_dataset_synthetic(spec.dump().c_str(), sy_split.c_str(), &data.p), "make-synthetic");
      if (sy_format == "raw") check(hm_dataset_save_raw(data.p, sy_out.c_str()), "writing " + sy_out);
      else check(hm_dataset_save_png_dir(data.p, sy_out.c_str()), "writing " + sy_out);
      std::cout << "wrote " << dataset_info(data.p)["size"] << " images to " << sy_out << "\n";
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
