#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "restfuse/error.hpp"

namespace restfuse::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

template <typename T>
  requires std::is_arithmetic_v<T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
  requires std::is_arithmetic_v<T>
T get(std::istream& is, const std::string& what) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    fail(ErrorKind::length, "unexpected end of file while reading " + what);
  }
  return value;
}

inline void put_bytes(std::ostream& os, const void* data, std::size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

inline void get_bytes(std::istream& is, void* data, std::size_t n, const std::string& what) {
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (is.gcount() != static_cast<std::streamsize>(n)) {
    fail(ErrorKind::length, "truncated " + what + ": expected " + std::to_string(n) + " bytes, got " +
                                std::to_string(is.gcount()));
  }
}

/// u8 length prefix + ASCII bytes.
inline void put_short_string(std::ostream& os, const std::string& s) {
  require(s.size() <= 255, ErrorKind::validation, "label longer than 255 bytes: " + s);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(s.size()));
  put_bytes(os, s.data(), s.size());
}

inline std::string get_short_string(std::istream& is, const std::string& what) {
  const auto n = get<std::uint8_t>(is, what + " length");
  std::string s(n, '\0');
  get_bytes(is, s.data(), n, what);
  return s;
}

inline void expect_magic(std::istream& is, const char (&magic)[5], const std::string& path) {
  char buf[4] = {};
  is.read(buf, 4);
  if (is.gcount() != 4 || std::memcmp(buf, magic, 4) != 0) {
    fail(ErrorKind::format, "bad magic in " + path + " (expected \"" + std::string(magic, 4) + "\")");
  }
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::io, "cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::io, "cannot open for reading: " + path);
  return is;
}

inline void finish_write(std::ofstream& os, const std::string& path) {
  os.flush();
  require(static_cast<bool>(os), ErrorKind::io, "write failed: " + path);
}

}  // namespace restfuse::binio
