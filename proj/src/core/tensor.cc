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

#include "archfuzz/tensor.h"

#include <sstream>

#include "archfuzz/errors.h"

namespace archfuzz {

bool TensorShape::is_valid() const {
  if (dims_.empty() || rank() > kMaxRank) return false;
  for (int64_t d : dims_) {
    if (d < 1) return false;
  }
  return true;
}

std::string TensorShape::to_string() const { return dims_to_string(dims_); }

TensorShape TensorShape::parse(const std::string& text) {
  std::vector<int64_t> dims;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, 'x')) {
    std::istringstream parts(token);
    std::string piece;
    while (std::getline(parts, piece, ',')) {
      if (piece.empty()) continue;
      try {
        size_t used = 0;
        dims.push_back(std::stoll(piece, &used));
        if (used != piece.size()) throw std::invalid_argument(piece);
      } catch (const std::exception&) {
        throw ConfigError("bad shape '" + text + "'");
      }
    }
  }
  TensorShape shape(dims);
  if (!shape.is_valid()) throw ConfigError("bad shape '" + text + "'");
  return shape;
}

std::string dims_to_string(const std::vector<int64_t>& dims) {
  std::string out;
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(dims[i]);
  }
  return out;
}

}  // namespace archfuzz
