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

#ifndef ARCHFUZZ_MODEL_SPEC_H_
#define ARCHFUZZ_MODEL_SPEC_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "archfuzz/graph.h"
#include "archfuzz/tensor.h"

namespace archfuzz {

inline constexpr int kModelFormatVersion = 1;

// A fully materialized generated model: graph with shapes, serialized initial
// weights, one input batch and its labels.
struct ModelSpec {
  std::string model_id;
  uint64_t seed = 0;
  int64_t batch_size = 4;
  std::string loss;
  TensorShape input_shape;
  TensorShape output_shape;
  ModelGraph graph;
  // weights[node_id] lists the node's trainable tensors in the order given by
  // its LayerKind::weight_shapes.
  std::vector<std::vector<Tensor<float>>> weights;
  Tensor<float> input_batch;  // [batch] + input_shape
  Tensor<float> labels;       // [batch] + output_shape
};

// Throws Error when shapes, weights, input or labels disagree with the graph.
void check_model_spec(const ModelSpec& spec);

// Writes model.json plus one little-endian f32 blob per tensor into `dir`.
void save_model_spec(const ModelSpec& spec, const std::filesystem::path& dir);
ModelSpec load_model_spec(const std::filesystem::path& dir);

// The model.json text exactly as save_model_spec writes it.
std::string model_manifest(const ModelSpec& spec);

// Draws every weight tensor uniformly in [-0.5, 0.5] keyed by
// (seed, node id, weight index, element). With `quantized` the draw snaps to
// {-0.5, -0.25, 0, 0.25, 0.5}.
std::vector<std::vector<Tensor<float>>> initial_weights(const ModelGraph& g,
                                                        uint64_t seed,
                                                        bool quantized);

}  // namespace archfuzz

#endif  // ARCHFUZZ_MODEL_SPEC_H_
