#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hydramix::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written with native little-endian stores");

/// Malformed or truncated file content. what() names the byte offset.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or unreadable file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ByteWriter {
 public:
  template <typename V>
  void put(V value) {
    static_assert(std::is_trivially_copyable_v<V>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(V));
  }
  void put_bytes(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  void put_string(std::string_view s) {
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  template <typename V>
  void put_array(std::span<const V> values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    bytes_.insert(bytes_.end(), p, p + values.size_bytes());
  }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string source)
      : data_(data), source_(std::move(source)) {}

  template <typename V>
  V get(const char* what) {
    V value;
    need(sizeof(V), what);
    std::memcpy(&value, data_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return value;
  }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  template <typename V>
  std::vector<V> get_array(std::size_t count, const char* what) {
    if (count > (data_.size() - pos_) / sizeof(V)) {
      fail(std::string("truncated while reading ") + what + " (" + std::to_string(count) +
           " elements declared)");
    }
    std::vector<V> out(count);
    std::memcpy(out.data(), data_.data() + pos_, count * sizeof(V));
    pos_ += count * sizeof(V);
    return out;
  }
  /// Reads a fixed magic and fails with the offset on mismatch.
  void expect_magic(std::string_view magic);

  [[noreturn]] void fail(const std::string& msg) const;

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (n > data_.size() - pos_) {
      fail(std::string("truncated while reading ") + what + " (need " + std::to_string(n) +
           " bytes, " + std::to_string(data_.size() - pos_) + " left)");
    }
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string source_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace hydramix::io
