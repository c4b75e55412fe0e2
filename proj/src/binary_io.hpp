#pragma once

// Little-endian primitive readers/writers shared by the binary file formats.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "sset/formats.hpp"

namespace sset::detail {

template <class T>
T byteswap_if_needed(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return v;
  } else {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &v, sizeof(T));
    std::reverse(bytes.begin(), bytes.end());
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
  }
}

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw FormatError(path_.string(), "cannot open for writing");
  }

  void magic(std::string_view m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }

  template <class T>
  void put(T v) {
    v = byteswap_if_needed(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }

  template <class T>
  void put_span(std::span<const T> values) {
    if constexpr (std::endian::native == std::endian::little) {
      out_.write(reinterpret_cast<const char*>(values.data()),
                 static_cast<std::streamsize>(values.size_bytes()));
    } else {
      for (T v : values) put(v);
    }
  }

  void put_string(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

  void finish() {
    out_.flush();
    if (!out_) throw FormatError(path_.string(), "write failed");
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw FormatError(path_.string(), "cannot open for reading");
  }

  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!in_ || got != m) throw FormatError(path_.string(), "bad magic, expected " + std::string(m));
  }

  void expect_version(std::uint32_t expected) {
    const auto v = get<std::uint32_t>();
    if (v != expected) {
      throw FormatError(path_.string(), "unsupported version " + std::to_string(v) +
                                            " (expected " + std::to_string(expected) + ")");
    }
  }

  template <class T>
  T get() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw FormatError(path_.string(), "unexpected end of file");
    return byteswap_if_needed(v);
  }

  template <class T>
  void get_span(std::span<T> out) {
    in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()));
    if (!in_) throw FormatError(path_.string(), "unexpected end of file");
    if constexpr (std::endian::native != std::endian::little) {
      for (T& v : out) v = byteswap_if_needed(v);
    }
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) throw FormatError(path_.string(), "unexpected end of file");
    return s;
  }

  bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

  void expect_eof() {
    if (!at_eof()) throw FormatError(path_.string(), "trailing bytes after payload");
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace sset::detail
