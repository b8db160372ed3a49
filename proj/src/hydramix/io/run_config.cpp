#include "hydramix/io/run_config.hpp"

#include "hydramix/numerics/tensor.hpp"

namespace hydramix::io {

using numerics::ContractError;

segmentation::SegParams SegmentationSection::resolve(std::size_t height, std::size_t width) const {
  auto p = segmentation::SegParams::defaults_for(height, width);
  if (k) p.k = *k;
  if (sigma) p.sigma = *sigma;
  if (min_size) p.min_size = *min_size;
  p.validate();
  return p;
}

void RunConfig::set_seed(std::uint64_t seed) {
  training.seed = seed;
  classifier.seed = seed;
}

void RunConfig::validate() const {
  generator.validate();
  discriminator.validate();
  training.validate();
  classifier.validate();
  if (segmentation.k && !(*segmentation.k > 0)) throw ContractError("segmentation.k must be positive");
  if (segmentation.sigma && !(*segmentation.sigma >= 0)) throw ContractError("segmentation.sigma must be >= 0");
  if (segmentation.min_size && *segmentation.min_size < 1) throw ContractError("segmentation.min_size must be >= 1");
  if (!(cse.tau > 0)) throw ContractError("cse.tau must be positive");
  if (generator.in_channels != discriminator.in_channels) {
    throw ContractError("generator and discriminator channel counts differ");
  }
}

namespace {

const nlohmann::json& object_section(const nlohmann::json& j, const std::string& name) {
  if (!j.is_object()) throw ContractError("config section '" + name + "' must be an object");
  return j;
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ContractError("run config must be a JSON object");
  RunConfig c;
  for (auto& [section, value] : j.items()) {
    const auto& v = object_section(value, section);
    if (section == "generator") {
      c.generator = v.get<networks::GeneratorConfig>();
    } else if (section == "discriminator") {
      c.discriminator = v.get<networks::DiscriminatorConfig>();
    } else if (section == "training") {
      c.training = v.get<training::TrainConfig>();
    } else if (section == "classifier") {
      c.classifier = v.get<classifier::ClassifierConfig>();
    } else if (section == "segmentation") {
      for (auto& [key, x] : v.items()) {
        if (key == "k") c.segmentation.k = x.get<double>();
        else if (key == "sigma") c.segmentation.sigma = x.get<double>();
        else if (key == "min_size") c.segmentation.min_size = x.get<int>();
        else throw ContractError("segmentation: unknown key '" + key + "'");
      }
    } else if (section == "masking") {
      for (auto& [key, x] : v.items()) {
        if (key == "n_mix") c.masking.n_mix = x.get<std::size_t>();
        else if (key == "p_select") c.masking.p_select = x.get<double>();
        else throw ContractError("masking: unknown key '" + key + "'");
      }
    } else if (section == "cse") {
      for (auto& [key, x] : v.items()) {
        if (key == "tau") c.cse.tau = x.get<double>();
        else throw ContractError("cse: unknown key '" + key + "'");
      }
    } else {
      throw ContractError("unknown config section '" + section + "'");
    }
  }
  if (c.masking.n_mix) c.training.n_mix = c.classifier.mix.n_mix = *c.masking.n_mix;
  if (c.masking.p_select) c.training.p_select = c.classifier.mix.p_select = *c.masking.p_select;
  c.validate();
  return c;
}

nlohmann::json run_config_to_json(const RunConfig& config) {
  nlohmann::json seg = nlohmann::json::object();
  if (config.segmentation.k) seg["k"] = *config.segmentation.k;
  if (config.segmentation.sigma) seg["sigma"] = *config.segmentation.sigma;
  if (config.segmentation.min_size) seg["min_size"] = *config.segmentation.min_size;
  nlohmann::json masking = nlohmann::json::object();
  if (config.masking.n_mix) masking["n_mix"] = *config.masking.n_mix;
  if (config.masking.p_select) masking["p_select"] = *config.masking.p_select;
  return {{"generator", config.generator},
          {"discriminator", config.discriminator},
          {"training", config.training},
          {"classifier", config.classifier},
          {"segmentation", seg},
          {"masking", masking},
          {"cse", {{"tau", config.cse.tau}}}};
}

void merge_json(nlohmann::json& base, const nlohmann::json& overlay) {
  if (!overlay.is_object() || !base.is_object()) {
    base = overlay;
    return;
  }
  for (auto& [key, value] : overlay.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object()) merge_json(base[key], value);
    else base[key] = value;
  }
}

}  // namespace hydramix::io
