// Copyright 2026 The Archfuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ARCHFUZZ_BLOB_IO_H_
#define ARCHFUZZ_BLOB_IO_H_

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace archfuzz {

// Little-endian IEEE-754 binary32 encoding, independent of host byte order.
// NaN payloads and signed infinities survive bit for bit.
inline void append_f32_le(std::string& out, std::span<const float> values) {
  const size_t base = out.size();
  out.resize(base + values.size() * 4);
  for (size_t i = 0; i < values.size(); ++i) {
    uint32_t bits;
    std::memcpy(&bits, &values[i], 4);
    for (int b = 0; b < 4; ++b) {
      out[base + 4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
}

inline std::vector<float> decode_f32_le(const char* data, size_t count) {
  std::vector<float> out(count);
  for (size_t i = 0; i < count; ++i) {
    uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<uint32_t>(static_cast<unsigned char>(data[4 * i + b]))
              << (8 * b);
    }
    std::memcpy(&out[i], &bits, 4);
  }
  return out;
}

inline void append_u32_le(std::string& out, uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

inline void append_u64_le(std::string& out, uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

inline uint64_t decode_uint_le(const char* data, int bytes) {
  uint64_t v = 0;
  for (int b = 0; b < bytes; ++b) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(data[b])) << (8 * b);
  }
  return v;
}

// Whole-file helpers; both throw IoError with the path in the message.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);
// Writes to a sibling temporary and renames, so readers never observe a
// partially written file.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& bytes);

}  // namespace archfuzz

#endif  // ARCHFUZZ_BLOB_IO_H_
