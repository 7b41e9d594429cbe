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

#ifndef ARCHFUZZ_GENERATOR_H_
#define ARCHFUZZ_GENERATOR_H_

#include <cstdint>
#include <string>
#include <vector>

#include "archfuzz/graph.h"
#include "archfuzz/model_spec.h"
#include "archfuzz/rng.h"
#include "archfuzz/tensor.h"
#include "archfuzz/usage_stats.h"

namespace archfuzz {

struct GenerationConfig {
  int n_models = 50;
  int max_cells = 5;      // MAX_c
  int max_vertices = 30;  // MAX_v
  TensorShape input_shape{8, 8, 3};
  TensorShape output_shape{10};
  uint64_t seed = 0;
  int64_t batch_size = 4;
  std::vector<std::string> excluded_kinds = default_excluded_kinds();
  // Empty means every registered loss.
  std::vector<std::string> loss_kinds;
  double p_chain = 0.5;  // probability of the chain template
  double p_skip = 0.3;   // per-pair skip-connection probability in chains
  // Upper bound on any node's per-example element count.
  int64_t element_budget = 512;
  // Upper bound on the trainable parameter count of one model.
  int64_t parameter_budget = 1 << 20;
  bool trigger_bias = false;
  // Number of input elements per batch replaced by NaN.
  int nan_inputs = 0;

  // Throws ConfigError on out-of-range settings.
  void validate() const;
};

// Chain template: vertices 0..n-1 linked in order, plus a skip edge i->j for
// every non-adjacent pair with probability p_skip.
ModelGraph generate_chain_dag(int n_vertices, double p_skip, Rng& rng);

// Cell template: input -> cell -> reduction -> ... -> cell -> output, with
// every cell a random DAG of 2..6 vertices repaired to one entry and one exit.
ModelGraph generate_cell_dag(int n_cells, Rng& rng);

// Random DAG used for one cell: Erdos-Renyi edges (p = 0.5) respecting vertex
// order, then every vertex other than 0 gets an in-edge from 0 if it had none
// and every vertex other than n-1 gets an out-edge to n-1 if it had none.
ModelGraph random_cell(int n_vertices, Rng& rng);

struct AssignedModel {
  ModelGraph graph;  // layer kinds, parameters and shapes filled in
  std::string loss;
};

// Turns a skeleton into a concrete model: the source becomes Input(L_i), other
// vertices get kinds by in-degree, MI inputs are projected onto a common
// shape, and an output head reaching L_o (plus the loss's activation) is
// appended after the sink. Usage counters in `stats` change only on success.
// Throws GenerationRetry when the skeleton cannot be materialized.
AssignedModel assign_layers(const ModelGraph& skeleton,
                            const GenerationConfig& cfg,
                            LayerUsageStats& stats, Rng& rng);

struct GenerationResult {
  std::vector<ModelSpec> models;
  LayerUsageStats stats;
  int64_t retries = 0;
};

// Generates cfg.n_models models one after another from a single stream
// seeded by cfg.seed, so a smaller n_models yields a prefix of a larger run.
// Throws Error after 100 consecutive failed skeletons.
GenerationResult generate_models(const GenerationConfig& cfg);

// Fills weights, inputs and labels for a materialized graph.
ModelSpec materialize_model(const AssignedModel& model,
                            const GenerationConfig& cfg, int index,
                            uint64_t model_seed);

std::string model_id_for(int index);

}  // namespace archfuzz

#endif  // ARCHFUZZ_GENERATOR_H_
