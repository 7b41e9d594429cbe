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

#include "archfuzz/usage_stats.h"

#include <algorithm>
#include <numeric>

#include "archfuzz/errors.h"

namespace archfuzz {

uint64_t LayerUsageStats::count(const std::string& name) const {
  auto it = counts_.find(name);
  return it == counts_.end() ? 0 : it->second;
}

std::vector<double> LayerUsageStats::probabilities(
    std::span<const std::string> names) const {
  std::vector<double> p;
  p.reserve(names.size());
  for (const std::string& n : names) p.push_back(score(n));
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= total;
  return p;
}

void LayerUsageStats::merge(const LayerUsageStats& other) {
  for (const auto& [name, c] : other.counts_) counts_[name] += c;
}

size_t roulette_select(std::span<const double> weights, Rng& rng) {
  if (weights.empty()) throw Error("roulette selection over an empty set");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double r = rng.uniform01() * total;
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (r < acc) return i;
  }
  return weights.size() - 1;
}

namespace {

const LayerKind& draw(Arity arity_class, const LayerUsageStats& stats,
                      Rng& rng, const std::vector<std::string>& excluded) {
  if (arity_class == Arity::kSource) {
    throw Error("the input layer is not selectable");
  }
  const auto kinds = selectable_kinds(arity_class, excluded);
  if (kinds.empty()) {
    throw Error("no selectable " + std::string(arity_name(arity_class)) +
                " layer kinds");
  }
  std::vector<double> scores;
  scores.reserve(kinds.size());
  for (const LayerKind* k : kinds) scores.push_back(stats.score(k->name));
  return *kinds[roulette_select(scores, rng)];
}

}  // namespace

const LayerKind& select_layer(Arity arity_class, LayerUsageStats& stats,
                              Rng& rng,
                              const std::vector<std::string>& excluded) {
  const LayerKind& k = draw(arity_class, stats, rng, excluded);
  stats.increment(k.name);
  return k;
}

const LayerKind& peek_layer(Arity arity_class, const LayerUsageStats& stats,
                            Rng& rng,
                            const std::vector<std::string>& excluded) {
  return draw(arity_class, stats, rng, excluded);
}

const LossKind& select_loss(LayerUsageStats& stats, Rng& rng,
                            const std::vector<std::string>& allowed) {
  std::vector<const LossKind*> losses;
  for (const LossKind& l : loss_registry()) {
    if (allowed.empty() ||
        std::find(allowed.begin(), allowed.end(), l.name) != allowed.end()) {
      losses.push_back(&l);
    }
  }
  if (losses.empty()) throw Error("no selectable loss kinds");
  std::vector<double> scores;
  for (const LossKind* l : losses) scores.push_back(stats.score(l->name));
  const LossKind& chosen = *losses[roulette_select(scores, rng)];
  stats.increment(chosen.name);
  return chosen;
}

}  // namespace archfuzz
