// Copyright 2026 The dmanc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

namespace dmanc {

inline void write_f64_le(std::ostream& out, double value) {
  auto word = std::bit_cast<std::uint64_t>(value);
  char bytes[8];
  for (char& b : bytes) {
    b = static_cast<char>(word & 0xffu);
    word >>= 8;
  }
  out.write(bytes, 8);
}

inline double decode_f64_le(const unsigned char* bytes) {
  std::uint64_t word = 0;
  for (int b = 7; b >= 0; --b) word = (word << 8) | bytes[b];
  return std::bit_cast<double>(word);
}

// False on short read.
inline bool read_f64_le(std::istream& in, double& value) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) return false;
  value = decode_f64_le(bytes);
  return true;
}

}  // namespace dmanc
