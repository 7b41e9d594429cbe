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

#ifndef ARCHFUZZ_GRAPH_H_
#define ARCHFUZZ_GRAPH_H_

#include <optional>
#include <string>
#include <vector>

#include "archfuzz/params.h"
#include "archfuzz/tensor.h"

namespace archfuzz {

struct Edge {
  int src = 0;
  int dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Node {
  int id = 0;
  // Empty for skeleton vertices that have not been assigned a layer yet.
  std::string kind;
  Params params;
  std::optional<TensorShape> shape;
  // Structural role from the template ("cell", "reduction", "reshape", ...).
  // Informational only.
  std::string role;
};

// Directed acyclic model graph. Node ids are dense: nodes[i].id == i.
struct ModelGraph {
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  int size() const { return static_cast<int>(nodes.size()); }
  int add_node(std::string kind = {}, Params params = {},
               std::string role = {});
  void add_edge(int src, int dst) { edges.push_back({src, dst}); }
  bool has_edge(int src, int dst) const;
  void remove_edge(int src, int dst);

  // Both in ascending node id.
  std::vector<int> predecessors(int node) const;
  std::vector<int> successors(int node) const;
  int in_degree(int node) const;
  int out_degree(int node) const;
  std::vector<int> sources() const;
  std::vector<int> sinks() const;
};

// Per-node predecessor/successor lists, precomputed for hot loops.
struct Adjacency {
  std::vector<std::vector<int>> preds;
  std::vector<std::vector<int>> succs;
  explicit Adjacency(const ModelGraph& g);
};

struct Violation {
  // One of: "node id", "bad edge", "self loop", "duplicate edge", "cycle",
  // "no source", "multiple sources", "no sink", "multiple sinks",
  // "isolated node", "arity".
  std::string rule;
  int node = -1;
  std::optional<Edge> edge;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(const std::string& rule) const;
  std::string to_string() const;
};

// Checks the structural invariants: dense ids, acyclic, exactly one source and
// one sink, no isolated node, and SI/MI in-degree rules for assigned kinds.
ValidationResult validate_graph(const ModelGraph& g);

// Kahn's algorithm with ties broken by ascending node id. Throws CycleError.
std::vector<int> topological_order(const ModelGraph& g);

// Assigns every node's output shape in topological order. The source node
// takes `input_shape`. Throws ShapeError naming the offending node.
ModelGraph infer_shapes(const ModelGraph& g, const TensorShape& input_shape);

}  // namespace archfuzz

#endif  // ARCHFUZZ_GRAPH_H_
