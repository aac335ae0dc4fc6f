#pragma once

// Little-endian scalar I/O over iostreams and an all-or-nothing file writer.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <istream>
#include <ostream>
#include <string>

#include "raf/error.hpp"

namespace raf::io {

template <class U>
void write_le(std::ostream& os, U value) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(value >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <class U>
U read_le(std::istream& is, const char* what) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) {
    throw FormatError(std::string("unexpected end of file while reading ") + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(buf[i]) << (8 * i);
  return value;
}

inline void write_u32(std::ostream& os, std::uint32_t v) { write_le(os, v); }
inline void write_f32(std::ostream& os, float v) { write_le(os, std::bit_cast<std::uint32_t>(v)); }
inline void write_f64(std::ostream& os, double v) { write_le(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t read_u32(std::istream& is, const char* what) { return read_le<std::uint32_t>(is, what); }
inline float read_f32(std::istream& is, const char* what) {
  return std::bit_cast<float>(read_le<std::uint32_t>(is, what));
}
inline double read_f64(std::istream& is, const char* what) {
  return std::bit_cast<double>(read_le<std::uint64_t>(is, what));
}

/// Writes through `body` into a sibling temporary, then renames it over
/// `path`. On any failure the temporary is removed and `path` is untouched.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body,
                       bool binary = true);

}  // namespace raf::io
