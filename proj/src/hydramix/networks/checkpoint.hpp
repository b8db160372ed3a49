#pragma once

// Versioned binary parameter container.
//
//   "HMCK"            4 bytes magic
//   version           u32 (currently 1)
//   config length     u32
//   config            UTF-8 JSON
//   records until EOF, each:
//     name length u32, name bytes, dtype u8 (0 = f32, 1 = f64),
//     rank u32, dims u64[rank], raw little-endian values

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "hydramix/networks/networks.hpp"

namespace hydramix::networks {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::variant<std::vector<float>, std::vector<double>> data;

  bool operator==(const TensorRecord&) const = default;
};

struct CheckpointFile {
  nlohmann::json config;
  std::vector<TensorRecord> records;

  const TensorRecord& record(const std::string& name) const;
  bool has(const std::string& name) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const CheckpointFile& file);
CheckpointFile deserialize_checkpoint(std::span<const std::uint8_t> bytes,
                                      const std::string& source = "<memory>");

void save_checkpoint(const std::filesystem::path& path, const CheckpointFile& file);
CheckpointFile load_checkpoint(const std::filesystem::path& path);

template <typename T>
TensorRecord record_of(const std::string& name, const Tensor<T>& tensor);

template <typename T>
TensorRecord record_of(const std::string& name, const numerics::Shape& shape,
                       const std::vector<T>& values);

/// Values of a record converted to T (exact when the dtype matches).
template <typename T>
std::vector<T> record_values(const TensorRecord& record);

template <typename T>
void append_parameters(CheckpointFile& file, const ParameterList<T>& params);

/// Loads every named parameter of `params` from the file; shapes must match.
template <typename T>
void restore_parameters(const CheckpointFile& file, ParameterList<T>& params);

}  // namespace hydramix::networks
