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

// Hand-built models for unit tests.
#ifndef ARCHFUZZ_TESTS_UNIT_TEST_MODELS_H_
#define ARCHFUZZ_TESTS_UNIT_TEST_MODELS_H_

#include <string>
#include <vector>

#include "archfuzz/graph.h"
#include "archfuzz/layer_kind.h"
#include "archfuzz/model_spec.h"

namespace archfuzz::testing {

// A chain Input -> layers[0] -> layers[1] -> ... over one example per batch
// row. Weights default to zeros; `weights[i]` overrides node i + 1's tensors.
struct Layer {
  std::string kind;
  Params params;
  std::vector<std::vector<float>> weights;
};

inline ModelSpec chain_spec(const TensorShape& input_shape, const std::vector<Layer>& layers,
                            const std::string& loss, int64_t batch,
                            std::vector<float> input, std::vector<float> labels) {
  ModelGraph g;
  g.add_node("Input");
  for (const Layer& l : layers) {
    const int id = g.add_node(l.kind, l.params);
    g.add_edge(id - 1, id);
  }
  ModelSpec spec;
  spec.model_id = "m00000";
  spec.batch_size = batch;
  spec.loss = loss;
  spec.input_shape = input_shape;
  spec.graph = infer_shapes(g, input_shape);
  spec.output_shape = *spec.graph.nodes.back().shape;
  spec.weights.resize(spec.graph.size());
  for (int i = 1; i < spec.graph.size(); ++i) {
    const TensorShape in[] = {*spec.graph.nodes[i - 1].shape};
    const auto shapes = layer_kind(spec.graph.nodes[i].kind).weight_shapes(in, spec.graph.nodes[i].params);
    for (size_t w = 0; w < shapes.size(); ++w) {
      Tensor<float> t(shapes[w]);
      const auto& given = layers[i - 1].weights;
      if (w < given.size()) t = Tensor<float>(shapes[w], given[w]);
      spec.weights[i].push_back(std::move(t));
    }
  }
  spec.input_batch = Tensor<float>(batched(batch, input_shape), std::move(input));
  spec.labels = Tensor<float>(batched(batch, spec.output_shape), std::move(labels));
  check_model_spec(spec);
  return spec;
}

}  // namespace archfuzz::testing

#endif  // ARCHFUZZ_TESTS_UNIT_TEST_MODELS_H_
