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

#ifndef ARCHFUZZ_TENSOR_H_
#define ARCHFUZZ_TENSOR_H_

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace archfuzz {

// Per-example shape of a node output. The batch dimension is never part of a
// TensorShape; it travels separately on the ModelSpec.
class TensorShape {
 public:
  static constexpr int kMaxRank = 4;

  TensorShape() = default;
  TensorShape(std::initializer_list<int64_t> dims) : dims_(dims) {}
  explicit TensorShape(std::vector<int64_t> dims) : dims_(std::move(dims)) {}

  const std::vector<int64_t>& dims() const { return dims_; }
  int rank() const { return static_cast<int>(dims_.size()); }
  int64_t operator[](int i) const { return dims_[i]; }
  int64_t back() const { return dims_.back(); }
  int64_t element_count() const {
    return std::accumulate(dims_.begin(), dims_.end(), int64_t{1},
                           std::multiplies<>());
  }

  // Rank in [1, 4] and every extent >= 1.
  bool is_valid() const;
  std::string to_string() const;  // "8x8x3"

  // Parses "8x8x3" (also accepts ',' as a separator).
  static TensorShape parse(const std::string& text);

  friend bool operator==(const TensorShape&, const TensorShape&) = default;

 private:
  std::vector<int64_t> dims_;
};

// Dense row-major tensor. `dims` is the full shape, including the batch
// dimension when the tensor holds a batch.
template <typename T>
struct Tensor {
  std::vector<int64_t> dims;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> d, T fill = T{0})
      : dims(std::move(d)), data(count_of(dims), fill) {}
  Tensor(std::vector<int64_t> d, std::vector<T> values)
      : dims(std::move(d)), data(std::move(values)) {
    if (static_cast<int64_t>(data.size()) != count_of(dims)) {
      throw std::invalid_argument("tensor data does not match its shape");
    }
  }

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  bool empty() const { return data.empty() && dims.empty(); }
  T& operator[](int64_t i) { return data[i]; }
  const T& operator[](int64_t i) const { return data[i]; }
  std::span<const T> values() const { return data; }

  static int64_t count_of(const std::vector<int64_t>& d) {
    return std::accumulate(d.begin(), d.end(), int64_t{1},
                           std::multiplies<>());
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.dims = dims;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

// Shape of a batch of `batch` examples of `shape`.
inline std::vector<int64_t> batched(int64_t batch, const TensorShape& shape) {
  std::vector<int64_t> d;
  d.reserve(shape.rank() + 1);
  d.push_back(batch);
  d.insert(d.end(), shape.dims().begin(), shape.dims().end());
  return d;
}

std::string dims_to_string(const std::vector<int64_t>& dims);

}  // namespace archfuzz

#endif  // ARCHFUZZ_TENSOR_H_
