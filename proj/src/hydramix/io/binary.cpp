#include "hydramix/io/binary.hpp"

#include <fstream>
#include <iterator>

namespace hydramix::io {

void ByteReader::expect_magic(std::string_view magic) {
  const std::size_t at = pos_;
  if (data_.size() - pos_ < magic.size()) {
    fail("file too short for magic '" + std::string(magic) + "'");
  }
  if (std::memcmp(data_.data() + pos_, magic.data(), magic.size()) != 0) {
    throw FormatError(source_ + ": bad magic at offset " + std::to_string(at) + " (expected '" +
                      std::string(magic) + "')");
  }
  pos_ += magic.size();
}

void ByteReader::fail(const std::string& msg) const {
  throw FormatError(source_ + ": " + msg + " at offset " + std::to_string(pos_));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace hydramix::io
