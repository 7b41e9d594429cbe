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

#ifndef ARCHFUZZ_LAYER_KIND_H_
#define ARCHFUZZ_LAYER_KIND_H_

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "archfuzz/params.h"
#include "archfuzz/rng.h"
#include "archfuzz/tensor.h"

namespace archfuzz {

enum class Arity {
  kSource,  // the model input; never selected
  kSingle,  // SI: exactly one input
  kMulti,   // MI: two or more inputs
};

enum class Category {
  kInput,
  kDense,
  kConvolution,
  kPooling,
  kNormalization,
  kActivation,
  kRecurrent,
  kMerge,
  kReshape,
};

std::string_view arity_name(Arity a);
std::string_view category_name(Category c);

struct ParamSpec {
  std::string name;
  std::string range;
};

struct SampleOptions {
  // Pooling layers favour a full-extent window with same padding, weights and
  // inputs are quantized, and classification heads saturate. Used to make
  // seeded faults fire reliably.
  bool trigger_bias = false;
};

// Thrown by shape rules; the message names the violated precondition.
class ShapeRuleViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LayerKind {
  std::string name;
  Arity arity = Arity::kSingle;
  Category category = Category::kActivation;
  // Required per-example input rank; 0 accepts any rank, -2 any rank >= 2.
  int input_rank = 0;
  // Layers with inherent randomness; excluded from generation by default and
  // declared unsupported by the engine backends.
  bool stochastic = false;
  int max_inputs = 1;
  std::vector<ParamSpec> schema;

  // Draws hyperparameters uniformly from the schema, restricted to values
  // that are legal for `input` (SI kinds only).
  std::function<Params(const TensorShape& input, Rng& rng,
                       const SampleOptions& options)>
      sample;
  // Deterministic output shape; throws ShapeRuleViolation.
  std::function<TensorShape(std::span<const TensorShape> inputs,
                            const Params& params)>
      shape_rule;
  // Shapes of the trainable tensors, in serialization order.
  std::function<std::vector<std::vector<int64_t>>(
      std::span<const TensorShape> inputs, const Params& params)>
      weight_shapes;

  bool accepts_rank(int rank) const {
    if (input_rank == 0) return true;
    if (input_rank == -2) return rank >= 2;
    return rank == input_rank;
  }
};

// Every layer kind the toolkit knows, in a fixed order. Includes the internal
// "Input" kind and the stochastic kinds.
const std::vector<LayerKind>& layer_registry();
const LayerKind* find_layer_kind(std::string_view name);
const LayerKind& layer_kind(std::string_view name);  // throws on unknown

// Selectable kinds of one arity class, minus `excluded`, in registry order.
std::vector<const LayerKind*> selectable_kinds(
    Arity arity, const std::vector<std::string>& excluded);

// Splits `n` into `rank` positive extents whose product is n.
std::vector<int64_t> random_factorization(int64_t n, int rank, Rng& rng);

// Default exclusion list: the kinds with inherent randomness.
std::vector<std::string> default_excluded_kinds();

enum class HeadActivation { kNone, kSoftmax, kSigmoid, kHardSigmoid };

struct LossKind {
  std::string name;
  HeadActivation head = HeadActivation::kNone;
  // Output multiplier the loss applies to its mean (mean absolute percentage
  // error reports 100 x mean). Used by the optional LC threshold scaling.
  double output_scale = 1.0;
};

const std::vector<LossKind>& loss_registry();
const LossKind& loss_kind(std::string_view name);  // throws on unknown

}  // namespace archfuzz

#endif  // ARCHFUZZ_LAYER_KIND_H_
