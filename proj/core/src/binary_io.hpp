#pragma once

// Little-endian binary readers/writers shared by the on-disk formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slotfill/error.hpp"

namespace slotfill::detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw DataError("cannot write " + path.string());
  }

  void magic(std::string_view tag) { out_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }

  void u32(std::uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, 4);
  }

  void u64(std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, 8);
  }

  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void f32s(std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      out_.write(reinterpret_cast<const char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(float)));
    } else {
      for (float v : values) f32(v);
    }
  }

  void string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

  void bytes(std::span<const std::uint8_t> data) {
    out_.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  }

  void finish() {
    out_.flush();
    if (!out_) throw DataError("write failed: " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path) : path_(path.string()), in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open " + path_);
  }

  const std::string& path() const noexcept { return path_; }

  void expect_magic(std::string_view tag) {
    std::string got(tag.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (in_.gcount() != static_cast<std::streamsize>(tag.size())) {
      if (in_.gcount() == 0) throw BadMagicError(path_, std::string(tag));
      throw TruncatedFileError(path_);
    }
    if (got != tag) throw BadMagicError(path_, std::string(tag));
  }

  void expect_version(std::uint32_t supported) {
    const std::uint32_t v = u32();
    if (v != supported) throw VersionMismatchError(path_, supported, v);
  }

  std::uint8_t u8() {
    char c;
    read(&c, 1);
    return static_cast<std::uint8_t>(c);
  }

  std::uint32_t u32() {
    unsigned char buf[4];
    read(reinterpret_cast<char*>(buf), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
  }

  std::uint64_t u64() {
    unsigned char buf[8];
    read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  void f32s(std::span<float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      read(reinterpret_cast<char*>(values.data()), values.size() * sizeof(float));
    } else {
      for (float& v : values) v = f32();
    }
  }

  std::string string() {
    const std::uint32_t n = u32();
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

  std::vector<std::uint8_t> bytes(std::size_t n) {
    std::vector<std::uint8_t> data(n);
    read(reinterpret_cast<char*>(data.data()), n);
    return data;
  }

  /// Throws unless the stream is exhausted.
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw FormatError(path_ + ": trailing bytes after payload");
    }
  }

 private:
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw TruncatedFileError(path_);
  }

  std::string path_;
  std::ifstream in_;
};

inline void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

/// Decodes one LEB128 value at `pos`; returns false when the buffer ends
/// mid-value.
inline bool get_varint(std::span<const std::uint8_t> in, std::size_t& pos, std::uint64_t& v) {
  v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    if (pos >= in.size()) return false;
    const std::uint8_t byte = in[pos++];
    v |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
    if ((byte & 0x80) == 0) return true;
  }
  return false;
}

}  // namespace slotfill::detail
