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

#include "archfuzz/graph.h"

#include <algorithm>
#include <functional>
#include <queue>
#include <set>

#include "archfuzz/errors.h"
#include "archfuzz/layer_kind.h"

namespace archfuzz {

int ModelGraph::add_node(std::string kind, Params params, std::string role) {
  Node n;
  n.id = size();
  n.kind = std::move(kind);
  n.params = std::move(params);
  n.role = std::move(role);
  nodes.push_back(std::move(n));
  return nodes.back().id;
}

bool ModelGraph::has_edge(int src, int dst) const {
  return std::find(edges.begin(), edges.end(), Edge{src, dst}) != edges.end();
}

void ModelGraph::remove_edge(int src, int dst) {
  std::erase(edges, Edge{src, dst});
}

std::vector<int> ModelGraph::predecessors(int node) const {
  std::vector<int> out;
  for (const Edge& e : edges) {
    if (e.dst == node) out.push_back(e.src);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> ModelGraph::successors(int node) const {
  std::vector<int> out;
  for (const Edge& e : edges) {
    if (e.src == node) out.push_back(e.dst);
  }
  std::sort(out.begin(), out.end());
  return out;
}

int ModelGraph::in_degree(int node) const {
  return static_cast<int>(std::count_if(
      edges.begin(), edges.end(), [node](const Edge& e) { return e.dst == node; }));
}

int ModelGraph::out_degree(int node) const {
  return static_cast<int>(std::count_if(
      edges.begin(), edges.end(), [node](const Edge& e) { return e.src == node; }));
}

std::vector<int> ModelGraph::sources() const {
  std::vector<int> in(size(), 0), out;
  for (const Edge& e : edges) {
    if (e.dst >= 0 && e.dst < size()) ++in[e.dst];
  }
  for (int i = 0; i < size(); ++i) {
    if (in[i] == 0) out.push_back(i);
  }
  return out;
}

std::vector<int> ModelGraph::sinks() const {
  std::vector<int> outd(size(), 0), out;
  for (const Edge& e : edges) {
    if (e.src >= 0 && e.src < size()) ++outd[e.src];
  }
  for (int i = 0; i < size(); ++i) {
    if (outd[i] == 0) out.push_back(i);
  }
  return out;
}

Adjacency::Adjacency(const ModelGraph& g)
    : preds(g.size()), succs(g.size()) {
  for (const Edge& e : g.edges) {
    preds[e.dst].push_back(e.src);
    succs[e.src].push_back(e.dst);
  }
  for (auto& p : preds) std::sort(p.begin(), p.end());
  for (auto& s : succs) std::sort(s.begin(), s.end());
}

bool ValidationResult::has(const std::string& rule) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&rule](const Violation& v) { return v.rule == rule; });
}

std::string ValidationResult::to_string() const {
  std::string out;
  for (const Violation& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.rule + ": " + v.message;
  }
  return out.empty() ? "ok" : out;
}

namespace {

// Returns the ids left unprocessed by Kahn's algorithm (empty when acyclic)
// and fills `order` with the processed prefix.
std::vector<int> kahn(const ModelGraph& g, std::vector<int>& order) {
  const int n = g.size();
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> succ(n);
  for (const Edge& e : g.edges) {
    ++indeg[e.dst];
    succ[e.src].push_back(e.dst);
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < n; ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  order.clear();
  while (!ready.empty()) {
    const int u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int v : succ[u]) {
      if (--indeg[v] == 0) ready.push(v);
    }
  }
  std::vector<int> rest;
  for (int i = 0; i < n; ++i) {
    if (indeg[i] > 0) rest.push_back(i);
  }
  return rest;
}

// Finds an edge that closes a cycle among `remaining` nodes.
Edge find_cycle_edge(const ModelGraph& g, const std::vector<int>& remaining) {
  std::set<int> alive(remaining.begin(), remaining.end());
  std::vector<int> state(g.size(), 0);  // 0 new, 1 on stack, 2 done
  std::optional<Edge> found;
  std::function<void(int)> dfs = [&](int u) {
    state[u] = 1;
    for (int v : g.successors(u)) {
      if (found || !alive.count(v)) continue;
      if (state[v] == 1) {
        found = Edge{u, v};
        return;
      }
      if (state[v] == 0) dfs(v);
    }
    state[u] = 2;
  };
  for (int u : remaining) {
    if (!found && state[u] == 0) dfs(u);
  }
  return found.value_or(Edge{remaining.front(), remaining.front()});
}

}  // namespace

ValidationResult validate_graph(const ModelGraph& g) {
  ValidationResult r;
  auto add = [&r](std::string rule, int node, std::optional<Edge> edge,
                  std::string message) {
    r.violations.push_back({std::move(rule), node, edge, std::move(message)});
  };
  const int n = g.size();
  if (n == 0) {
    add("no source", -1, std::nullopt, "graph has no nodes");
    return r;
  }
  for (int i = 0; i < n; ++i) {
    if (g.nodes[i].id != i) {
      add("node id", i, std::nullopt,
          "node at index " + std::to_string(i) + " has id " +
              std::to_string(g.nodes[i].id));
    }
  }
  std::set<std::pair<int, int>> seen;
  bool edges_ok = true;
  for (const Edge& e : g.edges) {
    const std::string name =
        std::to_string(e.src) + "->" + std::to_string(e.dst);
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
      add("bad edge", -1, e, "edge " + name + " references a missing node");
      edges_ok = false;
      continue;
    }
    if (e.src == e.dst) {
      add("self loop", e.src, e, "edge " + name + " is a self loop");
      continue;
    }
    if (!seen.insert({e.src, e.dst}).second) {
      add("duplicate edge", e.src, e, "edge " + name + " appears twice");
    }
  }
  if (!edges_ok) return r;

  std::vector<int> order;
  const std::vector<int> rest = kahn(g, order);
  if (!rest.empty() && !r.has("self loop")) {
    const Edge e = find_cycle_edge(g, rest);
    add("cycle", e.src, e,
        "cycle through edge " + std::to_string(e.src) + "->" +
            std::to_string(e.dst));
  }

  const std::vector<int> sources = g.sources();
  const std::vector<int> sinks = g.sinks();
  if (sources.empty()) add("no source", -1, std::nullopt, "no in-degree-0 node");
  if (sources.size() > 1) {
    add("multiple sources", sources[1], std::nullopt,
        std::to_string(sources.size()) + " nodes have in-degree 0");
  }
  if (sinks.empty()) add("no sink", -1, std::nullopt, "no out-degree-0 node");
  if (sinks.size() > 1) {
    add("multiple sinks", sinks[1], std::nullopt,
        std::to_string(sinks.size()) + " nodes have out-degree 0");
  }
  if (n > 1) {
    for (int i = 0; i < n; ++i) {
      if (g.in_degree(i) == 0 && g.out_degree(i) == 0) {
        add("isolated node", i, std::nullopt,
            "node " + std::to_string(i) + " has no edges");
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    const std::string& kind = g.nodes[i].kind;
    if (kind.empty()) continue;
    const LayerKind* k = find_layer_kind(kind);
    if (k == nullptr) {
      add("arity", i, std::nullopt, "unknown layer kind '" + kind + "'");
      continue;
    }
    const int indeg = g.in_degree(i);
    const bool fits = (k->arity == Arity::kSource && indeg == 0) ||
                      (k->arity == Arity::kSingle && indeg == 1) ||
                      (k->arity == Arity::kMulti && indeg >= 2 &&
                       indeg <= k->max_inputs);
    if (!fits) {
      add("arity", i, std::nullopt,
          kind + " (" + std::string(arity_name(k->arity)) + ") at node " +
              std::to_string(i) + " has " + std::to_string(indeg) +
              " inputs");
    }
  }
  return r;
}

std::vector<int> topological_order(const ModelGraph& g) {
  std::vector<int> order;
  const std::vector<int> rest = kahn(g, order);
  if (!rest.empty()) {
    const Edge e = find_cycle_edge(g, rest);
    throw CycleError(e.src, e.dst);
  }
  return order;
}

ModelGraph infer_shapes(const ModelGraph& g, const TensorShape& input_shape) {
  const ValidationResult v = validate_graph(g);
  if (!v.ok()) throw Error("invalid graph: " + v.to_string());
  ModelGraph out = g;
  const Adjacency adj(g);
  for (int id : topological_order(g)) {
    Node& node = out.nodes[id];
    const LayerKind* kind = find_layer_kind(node.kind);
    if (kind == nullptr) throw ShapeError(id, "no layer kind assigned");
    if (kind->arity == Arity::kSource) {
      if (!input_shape.is_valid()) throw ShapeError(id, "invalid input shape");
      node.shape = input_shape;
      continue;
    }
    std::vector<TensorShape> ins;
    for (int p : adj.preds[id]) ins.push_back(*out.nodes[p].shape);
    try {
      node.shape = kind->shape_rule(ins, node.params);
    } catch (const ShapeRuleViolation& e) {
      throw ShapeError(id, e.what());
    } catch (const Error& e) {
      throw ShapeError(id, e.what());
    }
    if (!node.shape->is_valid()) {
      throw ShapeError(id, "output shape " + node.shape->to_string() +
                               " is outside rank 1..4");
    }
  }
  return out;
}

}  // namespace archfuzz
