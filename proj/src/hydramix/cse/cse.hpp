#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace hydramix::cse {

/// A lexical concept with its direct subordinate concepts.
struct SynsetRecord {
  std::string id;
  std::vector<std::string> synonyms;
  std::string description;
  std::vector<std::string> hyponyms;
};

void to_json(nlohmann::json& j, const SynsetRecord& s);
void from_json(const nlohmann::json& j, SynsetRecord& s);

/// "Syn1, Syn2, ..., SynK: Description" (a trailing space remains when the
/// description is empty).
std::string synset_to_text(const SynsetRecord& synset);

/// Unit-norm embedding vectors keyed by image or synset id, in insertion order.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

  /// Stores `vector` rescaled to unit length (left untouched when already
  /// unit length within 1e-6). Throws on zero vectors, wrong dimension, or a
  /// duplicate id.
  void add(const std::string& id, std::vector<float> vector);
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  /// Throws std::out_of_range naming the id when absent.
  const std::vector<float>& at(const std::string& id) const;

  bool operator==(const EmbeddingTable& other) const {
    return dim_ == other.dim_ && ids_ == other.ids_ && vectors_ == other.vectors_;
  }

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<std::vector<float>> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Embedding file: "HMEB", version u32 (1), d u32, count u32, then per entry
// id length u32, id bytes (UTF-8), d little-endian f32.
std::vector<std::uint8_t> serialize_embeddings(const EmbeddingTable& table);
EmbeddingTable deserialize_embeddings(std::span<const std::uint8_t> bytes,
                                      const std::string& source = "<memory>");
void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

/// JSON array of {id, synonyms, description, hyponyms}.
std::vector<SynsetRecord> load_synsets(const std::filesystem::path& path);

double cosine_sim(std::span<const float> u, std::span<const float> v);

/// P(h_j) = mean over images of softmax_j(sim(x, h_j) / tau).
std::vector<double> synset_distribution(const std::vector<std::vector<float>>& image_embs,
                                        const std::vector<std::vector<float>>& hyponym_embs,
                                        double tau = 0.01);

/// Entropy in nats with 0 ln 0 = 0.
double cse_class(std::span<const double> distribution);

struct ClassCse {
  std::string class_id;
  std::size_t images = 0;
  std::size_t hyponyms = 0;
  double cse = 0;
  double max_cse = 0;  // ln(hyponyms)
  std::vector<double> distribution;
};

struct CseResult {
  std::vector<ClassCse> classes;      // classes with at least one hyponym
  std::vector<std::string> skipped;   // classes without hyponyms
  double overall = 0;                 // mean CSE over `classes`

  nlohmann::json to_json() const;
  /// class_id,images,hyponyms,cse,max_cse rows plus an "overall" row.
  std::string to_csv() const;
};

/// `per_class_images` maps a class synset id to the ids of its images.
CseResult cse_dataset(const std::map<std::string, std::vector<std::string>>& per_class_images,
                      const std::vector<SynsetRecord>& synsets, const EmbeddingTable& embeddings,
                      double tau = 0.01);

}  // namespace hydramix::cse
