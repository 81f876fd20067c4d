/*
 * Copyright The SMN Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Little-endian primitives for the SMNW / SMNS / SMNL formats.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "smn/tensor.hpp"

namespace smn {

/// Malformed or truncated file, or a failed read/write.
class FormatError : public Error {
 public:
  using Error::Error;
};

namespace io {

template <typename U>
inline void put_uint(std::ostream& os, U v) {
  std::array<char, sizeof(U)> b{};
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), b.size());
}

inline void put_u8(std::ostream& os, std::uint8_t v) { put_uint(os, v); }
inline void put_u32(std::ostream& os, std::uint32_t v) { put_uint(os, v); }
inline void put_u64(std::ostream& os, std::uint64_t v) { put_uint(os, v); }
inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

inline void put_f32s(std::ostream& os, std::span<const float> v) {
  for (float x : v) put_f32(os, x);
}

inline void put_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

/// Reads exactly n bytes; returns the count actually read.
inline std::size_t read_bytes(std::istream& is, char* dst, std::size_t n) {
  is.read(dst, static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(is.gcount());
}

template <typename U>
inline U get_uint(std::istream& is, const char* what) {
  std::array<unsigned char, sizeof(U)> b{};
  if (read_bytes(is, reinterpret_cast<char*>(b.data()), b.size()) != b.size())
    throw FormatError(std::string("truncated file while reading ") + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

inline std::uint8_t get_u8(std::istream& is, const char* what) {
  return get_uint<std::uint8_t>(is, what);
}
inline std::uint32_t get_u32(std::istream& is, const char* what) {
  return get_uint<std::uint32_t>(is, what);
}
inline std::uint64_t get_u64(std::istream& is, const char* what) {
  return get_uint<std::uint64_t>(is, what);
}
inline float get_f32(std::istream& is, const char* what) {
  return std::bit_cast<float>(get_u32(is, what));
}

inline void get_f32s(std::istream& is, std::span<float> dst, const char* what) {
  for (float& x : dst) x = get_f32(is, what);
}

inline void expect_magic(std::istream& is, std::string_view magic) {
  std::string got(magic.size(), '\0');
  if (read_bytes(is, got.data(), got.size()) != got.size() || got != magic)
    throw FormatError("bad magic: expected " + std::string(magic));
}

}  // namespace io
}  // namespace smn
