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

// Internal kernel interface shared by the engine translation units.
#ifndef ARCHFUZZ_SRC_ENGINE_KERNELS_H_
#define ARCHFUZZ_SRC_ENGINE_KERNELS_H_

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "archfuzz/graph.h"
#include "archfuzz/tensor.h"

namespace archfuzz::engine {

// Everything a layer kernel sees for one node. Tensors are batched.
template <typename T>
struct LayerCall {
  const Node* node = nullptr;
  std::vector<const Tensor<T>*> in;
  std::vector<TensorShape> in_shapes;  // per example
  TensorShape out_shape;               // per example
  const std::vector<Tensor<T>>* weights = nullptr;
  int64_t batch = 1;
  // Reordered accumulation and alternative formulas.
  bool reordered = false;
  // When set, kernels fold every branch decision (ReLU sign, argmax, clip
  // side) into this hash. The finite-difference oracle compares hashes to
  // tell when a perturbation crossed a kink.
  uint64_t* decisions = nullptr;

  const Params& params() const { return node->params; }
  const Tensor<T>& w(size_t i) const { return (*weights)[i]; }
  void note(uint64_t v) const {
    if (decisions != nullptr) {
      *decisions = (*decisions ^ (v + 0x9e3779b97f4a7c15ULL)) * 0x100000001b3ULL;
    }
  }
};

template <typename T>
using ForwardFn = std::function<Tensor<T>(const LayerCall<T>&)>;
// Returns dL/d(input k) for every input, given the forward output y and
// dL/dy.
template <typename T>
using BackwardFn = std::function<std::vector<Tensor<T>>(
    const LayerCall<T>&, const Tensor<T>& y, const Tensor<T>& dy)>;

template <typename T>
struct LayerKernel {
  ForwardFn<T> forward;
  BackwardFn<T> backward;
};

// pred and labels are batched and share a shape; the last axis holds the
// classes / output units.
template <typename T>
struct LossKernel {
  std::function<T(const Tensor<T>& pred, const Tensor<T>& labels,
                  bool reordered, uint64_t* decisions)>
      value;
  std::function<Tensor<T>(const Tensor<T>& pred, const Tensor<T>& labels,
                          bool reordered)>
      grad;
};

template <typename T>
struct KernelTable {
  std::map<std::string, LayerKernel<T>> layers;
  std::map<std::string, LossKernel<T>> losses;
};

// Honest kernels for every layer kind (losses left empty).
template <typename T>
KernelTable<T> honest_layer_kernels();
// Adds the honest loss kernels.
template <typename T>
void add_honest_losses(KernelTable<T>& table);

// Per-domain fault installers; each returns false when the class is not one
// of its own.
template <typename T>
bool apply_layer_fault(KernelTable<T>& table, const std::string& fault);
template <typename T>
bool apply_loss_fault(KernelTable<T>& table, const std::string& fault);

// Honest tables with the given fault applied ("" or "none" for honest),
// built once and cached.
template <typename T>
const KernelTable<T>& kernel_table(const std::string& fault);

// Window geometry along one spatial axis. Same padding follows the TF rule:
// pad_total = max((out - 1) * stride + window - in, 0) with the smaller half
// before.
struct Axis {
  int64_t in = 1, out = 1, window = 1, stride = 1, pad_before = 0;
};

Axis make_axis(int64_t in, int64_t window, int64_t stride,
               const std::string& padding);

// Accumulator type for reductions and products. f32 kernels work in double.
template <typename T>
using Accum = std::conditional_t<std::is_same_v<T, float>, double, T>;

// Sum of term(i) for i in [0, n) in the accumulator type; the reordered
// policy runs backwards. Neumaier compensation keeps the order-dependent
// error far below one f32 rounding step, so both policies round the same
// near-exact value.
template <typename T, typename F>
Accum<T> wide_sum(int64_t n, bool reordered, F&& term) {
  Accum<T> sum = 0;
  Accum<T> comp = 0;
  auto add = [&](Accum<T> v) {
    const Accum<T> t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  };
  if (reordered) {
    for (int64_t i = n - 1; i >= 0; --i) add(term(i));
  } else {
    for (int64_t i = 0; i < n; ++i) add(term(i));
  }
  return sum + comp;
}

template <typename T, typename F>
T ordered_sum(int64_t n, bool reordered, F&& term) {
  return static_cast<T>(wide_sum<T>(n, reordered, term));
}

// Scatter target for backward passes that add many contributions into one
// gradient element; rounds to T once at the end.
template <typename T>
struct WideGrad {
  std::vector<int64_t> dims;
  std::vector<Accum<T>> acc;
  explicit WideGrad(const std::vector<int64_t>& d)
      : dims(d), acc(static_cast<size_t>(Tensor<T>::count_of(d)), 0) {}
  Accum<T>& operator[](int64_t i) { return acc[static_cast<size_t>(i)]; }
  Tensor<T> round() const {
    Tensor<T> out(dims);
    for (size_t i = 0; i < acc.size(); ++i) out[static_cast<int64_t>(i)] = static_cast<T>(acc[i]);
    return out;
  }
};

template <typename T>
T sigmoid(T x, bool reordered) {
  // The reordered form splits on the sign so exp never overflows.
  using A = Accum<T>;
  if (reordered) {
    if (x >= T(0)) return static_cast<T>(A(1) / (A(1) + std::exp(-A(x))));
    const A e = std::exp(A(x));
    return static_cast<T>(e / (A(1) + e));
  }
  return static_cast<T>(A(1) / (A(1) + std::exp(-A(x))));
}

}  // namespace archfuzz::engine

#endif  // ARCHFUZZ_SRC_ENGINE_KERNELS_H_
