#include "hydramix/cse/cse.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hydramix/io/binary.hpp"
#include "hydramix/numerics/tensor.hpp"

namespace hydramix::cse {

using numerics::ContractError;

void to_json(nlohmann::json& j, const SynsetRecord& s) {
  j = {{"id", s.id}, {"synonyms", s.synonyms}, {"description", s.description}, {"hyponyms", s.hyponyms}};
}

void from_json(const nlohmann::json& j, SynsetRecord& s) {
  s = SynsetRecord{};
  for (auto& [key, value] : j.items()) {
    if (key == "id") s.id = value.get<std::string>();
    else if (key == "synonyms") s.synonyms = value.get<std::vector<std::string>>();
    else if (key == "description") s.description = value.get<std::string>();
    else if (key == "hyponyms") s.hyponyms = value.get<std::vector<std::string>>();
    else throw ContractError("synset record: unknown key '" + key + "'");
  }
  if (s.id.empty()) throw ContractError("synset record: missing id");
  if (s.synonyms.empty()) throw ContractError("synset '" + s.id + "' has no synonyms");
}

std::string synset_to_text(const SynsetRecord& synset) {
  if (synset.synonyms.empty()) throw ContractError("synset '" + synset.id + "' has no synonyms");
  std::string out = synset.synonyms[0];
  for (std::size_t i = 1; i < synset.synonyms.size(); ++i) out += ", " + synset.synonyms[i];
  return out + ": " + synset.description;
}

void EmbeddingTable::add(const std::string& id, std::vector<float> vector) {
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_ || dim_ == 0) {
    throw ContractError("embedding '" + id + "' has dimension " + std::to_string(vector.size()) +
                        ", table expects " + std::to_string(dim_));
  }
  if (index_.count(id)) throw ContractError("duplicate embedding id '" + id + "'");
  double sq = 0;
  for (float v : vector) sq += static_cast<double>(v) * v;
  const double norm = std::sqrt(sq);
  if (!(norm > 0) || !std::isfinite(norm)) throw ContractError("embedding '" + id + "' is zero or not finite");
  if (std::abs(norm - 1.0) > 1e-6) {
    for (auto& v : vector) v = static_cast<float>(v / norm);
  }
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  vectors_.push_back(std::move(vector));
}

const std::vector<float>& EmbeddingTable::at(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("no embedding for id '" + id + "'");
  return vectors_[it->second];
}

std::vector<std::uint8_t> serialize_embeddings(const EmbeddingTable& table) {
  io::ByteWriter out;
  out.put_string("HMEB");
  out.put<std::uint32_t>(1);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(table.dim()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(table.size()));
  for (const auto& id : table.ids()) {
    out.put<std::uint32_t>(static_cast<std::uint32_t>(id.size()));
    out.put_string(id);
    out.put_array(std::span<const float>(table.at(id)));
  }
  return out.take();
}

EmbeddingTable deserialize_embeddings(std::span<const std::uint8_t> bytes, const std::string& source) {
  io::ByteReader in(bytes, source);
  in.expect_magic("HMEB");
  const auto version = in.get<std::uint32_t>("version");
  if (version != 1) in.fail("unsupported embedding version " + std::to_string(version));
  const auto dim = in.get<std::uint32_t>("dimension");
  const auto count = in.get<std::uint32_t>("entry count");
  if (dim == 0) in.fail("zero embedding dimension");
  EmbeddingTable table(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = in.get<std::uint32_t>("id length");
    auto id = in.get_string(len, "id");
    const std::size_t at = in.offset();
    auto vec = in.get_array<float>(dim, "embedding values");
    try {
      table.add(id, std::move(vec));
    } catch (const ContractError& e) {
      throw io::FormatError(source + " at offset " + std::to_string(at) + ": " + e.what());
    }
  }
  if (!in.at_end()) in.fail("trailing bytes after the last entry");
  return table;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  io::write_file_atomic(path, serialize_embeddings(table));
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  return deserialize_embeddings(io::read_file(path), path.string());
}

std::vector<SynsetRecord> load_synsets(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw io::FormatError("'" + path.string() + "': " + e.what());
  }
  if (!j.is_array()) throw io::FormatError("'" + path.string() + "': expected a JSON array of synsets");
  return j.get<std::vector<SynsetRecord>>();
}

double cosine_sim(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) throw numerics::DimensionError("cosine_sim: vector lengths differ");
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * v[i];
    nu += static_cast<double>(u[i]) * u[i];
    nv += static_cast<double>(v[i]) * v[i];
  }
  if (nu == 0 || nv == 0) throw ContractError("cosine_sim: zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

std::vector<double> synset_distribution(const std::vector<std::vector<float>>& image_embs,
                                        const std::vector<std::vector<float>>& hyponym_embs,
                                        double tau) {
  if (image_embs.empty()) throw ContractError("synset_distribution: no images");
  if (hyponym_embs.empty()) throw ContractError("synset_distribution: no hyponyms");
  if (!(tau > 0)) throw ContractError("synset_distribution: tau must be positive");
  const std::size_t n = hyponym_embs.size();
  std::vector<double> total(n, 0.0), logits(n);
  for (const auto& x : image_embs) {
    for (std::size_t j = 0; j < n; ++j) logits[j] = cosine_sim(x, hyponym_embs[j]) / tau;
    const double top = *std::max_element(logits.begin(), logits.end());
    double z = 0;
    for (auto& l : logits) z += (l = std::exp(l - top));
    for (std::size_t j = 0; j < n; ++j) total[j] += logits[j] / z;
  }
  for (auto& p : total) p /= static_cast<double>(image_embs.size());
  return total;
}

double cse_class(std::span<const double> distribution) {
  double h = 0;
  for (double p : distribution) {
    if (p < 0) throw ContractError("cse_class: negative probability");
    if (p > 0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

CseResult cse_dataset(const std::map<std::string, std::vector<std::string>>& per_class_images,
                      const std::vector<SynsetRecord>& synsets, const EmbeddingTable& embeddings,
                      double tau) {
  std::map<std::string, const SynsetRecord*> by_id;
  for (const auto& s : synsets) by_id[s.id] = &s;
  CseResult result;
  for (const auto& [class_id, images] : per_class_images) {
    const auto it = by_id.find(class_id);
    if (it == by_id.end()) throw ContractError("cse: class '" + class_id + "' has no synset record");
    const SynsetRecord& synset = *it->second;
    if (synset.hyponyms.empty()) {
      result.skipped.push_back(class_id);
      continue;
    }
    if (images.empty()) throw ContractError("cse: class '" + class_id + "' has no images");
    std::vector<std::vector<float>> x, h;
    for (const auto& id : images) x.push_back(embeddings.at(id));
    for (const auto& id : synset.hyponyms) h.push_back(embeddings.at(id));
    ClassCse c;
    c.class_id = class_id;
    c.images = images.size();
    c.hyponyms = h.size();
    c.distribution = synset_distribution(x, h, tau);
    c.cse = cse_class(c.distribution);
    c.max_cse = std::log(static_cast<double>(h.size()));
    result.classes.push_back(std::move(c));
  }
  if (result.classes.empty()) throw ContractError("cse: no class has hyponyms");
  double sum = 0;
  for (const auto& c : result.classes) sum += c.cse;
  result.overall = sum / static_cast<double>(result.classes.size());
  return result;
}

nlohmann::json CseResult::to_json() const {
  nlohmann::json classes_json = nlohmann::json::array();
  for (const auto& c : classes) {
    classes_json.push_back({{"class_id", c.class_id},
                            {"images", c.images},
                            {"hyponyms", c.hyponyms},
                            {"cse", c.cse},
                            {"max_cse", c.max_cse},
                            {"distribution", c.distribution}});
  }
  return {{"classes", classes_json}, {"skipped", skipped}, {"overall", overall}};
}

std::string CseResult::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "class_id,images,hyponyms,cse,max_cse\n";
  for (const auto& c : classes) {
    out << c.class_id << ',' << c.images << ',' << c.hyponyms << ',' << c.cse << ',' << c.max_cse << '\n';
  }
  out << "overall,,," << overall << ",\n";
  return out.str();
}

}  // namespace hydramix::cse
