#pragma once

#include "supercut/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace supercut {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put_array(std::span<const T> values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    bytes_.insert(bytes_.end(), p, p + values.size_bytes());
  }

  void put_magic(std::string_view magic) { bytes_.insert(bytes_.end(), magic.begin(), magic.end()); }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::size_t size() const { return bytes_.size(); }

private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader; running past the end throws kTruncated.
class ByteReader {
public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return value;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void get_array(std::span<T> out) {
    require(out.size_bytes());
    std::memcpy(out.data(), bytes_.data() + offset_, out.size_bytes());
    offset_ += out.size_bytes();
  }

  /// Throws kVersionMismatch when the magic differs (kTruncated if too short).
  void expect_magic(std::string_view magic) {
    require(magic.size());
    if (std::memcmp(bytes_.data() + offset_, magic.data(), magic.size()) != 0) {
      throw Error(ErrorCode::kVersionMismatch,
                  context_ + ": expected magic '" + std::string(magic) + "'");
    }
    offset_ += magic.size();
  }

  void seek(std::size_t offset) {
    if (offset > bytes_.size()) throw Error(ErrorCode::kTruncated, context_ + ": seek past end");
    offset_ = offset;
  }

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }
  bool at_end() const { return offset_ == bytes_.size(); }
  const std::string& context() const { return context_; }

private:
  void require(std::size_t n) const {
    if (bytes_.size() - offset_ < n) {
      throw Error(ErrorCode::kTruncated, context_ + ": unexpected end of data at byte " + std::to_string(offset_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::string context_;
  std::size_t offset_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file then renames, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace supercut
