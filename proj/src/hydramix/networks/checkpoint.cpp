#include "hydramix/networks/checkpoint.hpp"

#include "hydramix/io/binary.hpp"

namespace hydramix::networks {

using io::ByteReader;
using io::ByteWriter;
using io::FormatError;

const TensorRecord& CheckpointFile::record(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return r;
  throw FormatError("checkpoint has no record named '" + name + "'");
}

bool CheckpointFile::has(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return true;
  return false;
}

std::vector<std::uint8_t> serialize_checkpoint(const CheckpointFile& file) {
  ByteWriter out;
  out.put_string("HMCK");
  out.put<std::uint32_t>(kCheckpointVersion);
  const std::string config = file.config.dump();
  out.put<std::uint32_t>(static_cast<std::uint32_t>(config.size()));
  out.put_string(config);
  for (const auto& r : file.records) {
    out.put<std::uint32_t>(static_cast<std::uint32_t>(r.name.size()));
    out.put_string(r.name);
    out.put<std::uint8_t>(std::holds_alternative<std::vector<float>>(r.data) ? 0 : 1);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(r.dims.size()));
    for (auto d : r.dims) out.put<std::uint64_t>(d);
    std::visit([&](const auto& v) { out.put_array(std::span(v)); }, r.data);
  }
  return out.take();
}

CheckpointFile deserialize_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source) {
  ByteReader in(bytes, source);
  in.expect_magic("HMCK");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    in.fail("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointFile file;
  const auto config_len = in.get<std::uint32_t>("config length");
  const std::string config = in.get_string(config_len, "config JSON");
  try {
    file.config = nlohmann::json::parse(config);
  } catch (const nlohmann::json::exception& e) {
    in.fail(std::string("config JSON does not parse: ") + e.what());
  }
  while (!in.at_end()) {
    TensorRecord r;
    const auto name_len = in.get<std::uint32_t>("record name length");
    r.name = in.get_string(name_len, "record name");
    const auto dtype = in.get<std::uint8_t>("dtype tag");
    if (dtype > 1) in.fail("unknown dtype tag " + std::to_string(dtype) + " in '" + r.name + "'");
    const auto rank = in.get<std::uint32_t>("rank");
    if (rank == 0 || rank > 8) in.fail("implausible rank " + std::to_string(rank));
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto d = in.get<std::uint64_t>("dimension");
      if (d == 0 || d > (std::uint64_t{1} << 40)) in.fail("implausible dimension in '" + r.name + "'");
      r.dims.push_back(d);
      count *= d;
    }
    if (dtype == 0) r.data = in.get_array<float>(count, "f32 values");
    else r.data = in.get_array<double>(count, "f64 values");
    file.records.push_back(std::move(r));
  }
  return file;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointFile& file) {
  io::write_file_atomic(path, serialize_checkpoint(file));
}

CheckpointFile load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return deserialize_checkpoint(bytes, path.string());
}

template <typename T>
TensorRecord record_of(const std::string& name, const numerics::Shape& shape,
                       const std::vector<T>& values) {
  TensorRecord r;
  r.name = name;
  for (auto d : shape) r.dims.push_back(d);
  r.data = values;
  return r;
}

template <typename T>
TensorRecord record_of(const std::string& name, const Tensor<T>& tensor) {
  return record_of<T>(name, tensor.shape(),
                      std::vector<T>(tensor.values().begin(), tensor.values().end()));
}

template <typename T>
std::vector<T> record_values(const TensorRecord& record) {
  return std::visit(
      [](const auto& v) { return std::vector<T>(v.begin(), v.end()); }, record.data);
}

template <typename T>
void append_parameters(CheckpointFile& file, const ParameterList<T>& params) {
  for (const auto& p : params) file.records.push_back(record_of(p.name, p.tensor));
}

template <typename T>
void restore_parameters(const CheckpointFile& file, ParameterList<T>& params) {
  for (auto& p : params) {
    const TensorRecord& r = file.record(p.name);
    numerics::Shape shape(r.dims.begin(), r.dims.end());
    if (shape != p.tensor.shape()) {
      throw FormatError("checkpoint record '" + p.name + "' has shape " +
                        numerics::shape_str(shape) + ", model expects " +
                        numerics::shape_str(p.tensor.shape()));
    }
    const auto values = record_values<T>(r);
    auto dst = p.tensor.mutable_values();
    std::copy(values.begin(), values.end(), dst.begin());
  }
}

#define HM_INSTANTIATE(T)                                                                    \
  template TensorRecord record_of(const std::string&, const numerics::Shape&,                \
                                  const std::vector<T>&);                                    \
  template TensorRecord record_of(const std::string&, const Tensor<T>&);                     \
  template std::vector<T> record_values(const TensorRecord&);                                \
  template void append_parameters(CheckpointFile&, const ParameterList<T>&);                 \
  template void restore_parameters(const CheckpointFile&, ParameterList<T>&);

HM_INSTANTIATE(float)
HM_INSTANTIATE(double)
#undef HM_INSTANTIATE

}  // namespace hydramix::networks
