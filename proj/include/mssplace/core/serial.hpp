#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mssplace/core/errors.hpp"

// Little-endian binary primitives shared by every on-disk container
// (PKT1 checkpoints, EMB1 embeddings, PDB1 databases, IMG1/PCD1 payloads).

namespace mss::serial {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats assume a little-endian host");

inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline void write_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  write_bytes(os, s.data(), s.size());
}

inline std::uint64_t read_u64(std::istream& is, const char* what) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw DataError(std::string("truncated file while reading ") + what);
  return v;
}

inline double read_f64(std::istream& is, const char* what) {
  double v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw DataError(std::string("truncated file while reading ") + what);
  return v;
}

inline void read_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
  if (!is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n)))
    throw DataError(std::string("truncated file while reading ") + what);
}

inline std::string read_string(std::istream& is, const char* what) {
  const std::uint64_t n = read_u64(is, what);
  if (n > (1ull << 32)) throw DataError(std::string("implausible string length in ") + what);
  std::string s(n, '\0');
  read_bytes(is, s.data(), n, what);
  return s;
}

inline void expect_magic(std::istream& is, const char magic[4], const char* what) {
  char buf[4] = {0, 0, 0, 0};
  if (!is.read(buf, 4) || std::memcmp(buf, magic, 4) != 0)
    throw DataError(std::string("bad magic, not a ") + what + " file");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open for reading: " + path);
  return is;
}

}  // namespace mss::serial
