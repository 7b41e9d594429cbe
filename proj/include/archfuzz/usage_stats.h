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

#ifndef ARCHFUZZ_USAGE_STATS_H_
#define ARCHFUZZ_USAGE_STATS_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "archfuzz/layer_kind.h"
#include "archfuzz/rng.h"

namespace archfuzz {

// Selection counters for fitness-proportionate layer selection. A kind chosen
// c times scores s = 1 / (c + 1); within one arity class the probability of a
// kind is its score over the class's score sum, so rarely used kinds are
// favoured.
class LayerUsageStats {
 public:
  uint64_t count(const std::string& name) const;
  void set_count(const std::string& name, uint64_t c) { counts_[name] = c; }
  void increment(const std::string& name) { ++counts_[name]; }
  double score(const std::string& name) const {
    return 1.0 / (static_cast<double>(count(name)) + 1.0);
  }

  // Selection probabilities of `names`, in order.
  std::vector<double> probabilities(std::span<const std::string> names) const;

  void merge(const LayerUsageStats& other);
  const std::map<std::string, uint64_t>& counts() const { return counts_; }

 private:
  std::map<std::string, uint64_t> counts_;
};

// Roulette-wheel draw: index i with probability weights[i] / sum(weights).
size_t roulette_select(std::span<const double> weights, Rng& rng);

// Draws a kind of the given arity class (SI or MI) and records the selection.
// Throws Error when the class has no selectable kind.
const LayerKind& select_layer(Arity arity_class, LayerUsageStats& stats,
                              Rng& rng,
                              const std::vector<std::string>& excluded);

// Same draw without updating the counters.
const LayerKind& peek_layer(Arity arity_class, const LayerUsageStats& stats,
                            Rng& rng,
                            const std::vector<std::string>& excluded);

// Fitness-proportionate choice among loss kinds; records the selection.
const LossKind& select_loss(LayerUsageStats& stats, Rng& rng,
                            const std::vector<std::string>& allowed);

}  // namespace archfuzz

#endif  // ARCHFUZZ_USAGE_STATS_H_
