#pragma once

// Internal little-endian binary I/O helpers shared by the corpus and
// checkpoint writers. Not installed.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "sessrec/error.hpp"

namespace sessrec::binio {

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& in, void* p, std::size_t n,
                       const char* what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw DataError(std::string("truncated file while reading ") + what);
  }
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(out, b, 4);
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  read_bytes(in, b, 4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(out, b, 8);
}

inline std::uint64_t read_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  read_bytes(in, b, 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

inline double read_f64(std::istream& in, const char* what) {
  const std::uint64_t bits = read_u64(in, what);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

// Unsigned LEB128.
inline void write_varint(std::ostream& out, std::uint64_t v) {
  while (v >= 0x80) {
    const unsigned char byte = static_cast<unsigned char>(v) | 0x80;
    write_bytes(out, &byte, 1);
    v >>= 7;
  }
  const auto byte = static_cast<unsigned char>(v);
  write_bytes(out, &byte, 1);
}

inline std::uint64_t read_varint(std::istream& in, const char* what) {
  std::uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    unsigned char byte;
    read_bytes(in, &byte, 1, what);
    v |= static_cast<std::uint64_t>(byte & 0x7F) << shift;
    if ((byte & 0x80) == 0) return v;
  }
  throw DataError(std::string("overlong varint while reading ") + what);
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_varint(out, s.size());
  write_bytes(out, s.data(), s.size());
}

inline std::string read_string(std::istream& in, const char* what) {
  const std::uint64_t n = read_varint(in, what);
  if (n > (1ULL << 30)) throw DataError(std::string("implausible string length in ") + what);
  std::string s(n, '\0');
  if (n > 0) read_bytes(in, s.data(), n, what);
  return s;
}

}  // namespace sessrec::binio
