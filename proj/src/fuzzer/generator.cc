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

#include "archfuzz/generator.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "archfuzz/errors.h"
#include "archfuzz/layer_kind.h"

namespace archfuzz {

namespace {

constexpr int kParamAttempts = 32;
constexpr int kMaxConsecutiveFailures = 100;

// Key domains for the counter-based draws. Weight draws use node ids, which
// stay far below these.
constexpr uint64_t kInputDomain = uint64_t{1} << 32;
constexpr uint64_t kLabelDomain = kInputDomain + 1;
constexpr uint64_t kNanDomain = kInputDomain + 2;
constexpr uint64_t kModelSeedDomain = kInputDomain + 3;

}  // namespace

void GenerationConfig::validate() const {
  if (n_models < 1) throw ConfigError("n_models must be >= 1");
  if (max_cells < 1) throw ConfigError("max_cells must be >= 1");
  if (max_vertices < 1) throw ConfigError("max_vertices must be >= 1");
  if (!input_shape.is_valid()) throw ConfigError("input shape must have rank 1..4");
  if (!output_shape.is_valid()) throw ConfigError("output shape must have rank 1..4");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (p_chain < 0 || p_chain > 1) throw ConfigError("p_chain must be in [0, 1]");
  if (p_skip < 0 || p_skip > 1) throw ConfigError("p_skip must be in [0, 1]");
  if (element_budget < 1) throw ConfigError("element_budget must be >= 1");
  if (input_shape.element_count() > element_budget ||
      output_shape.element_count() > element_budget) {
    throw ConfigError("input and output shapes must fit the element budget");
  }
  if (nan_inputs < 0 ||
      nan_inputs > batch_size * input_shape.element_count()) {
    throw ConfigError("nan_inputs exceeds the input batch size");
  }
  for (const std::string& k : excluded_kinds) {
    if (find_layer_kind(k) == nullptr) {
      throw ConfigError("unknown layer kind in exclusion list: " + k);
    }
  }
  for (const std::string& l : loss_kinds) {
    bool known = false;
    for (const LossKind& lk : loss_registry()) known |= lk.name == l;
    if (!known) throw ConfigError("unknown loss kind: " + l);
  }
}

ModelGraph generate_chain_dag(int n_vertices, double p_skip, Rng& rng) {
  ModelGraph g;
  for (int i = 0; i < n_vertices; ++i) {
    g.add_node({}, {},
               i == 0 ? "input" : (i + 1 == n_vertices ? "output" : "chain"));
  }
  for (int i = 0; i + 1 < n_vertices; ++i) g.add_edge(i, i + 1);
  for (int i = 0; i < n_vertices; ++i) {
    for (int j = i + 2; j < n_vertices; ++j) {
      if (rng.bernoulli(p_skip)) g.add_edge(i, j);
    }
  }
  return g;
}

ModelGraph random_cell(int n_vertices, Rng& rng) {
  ModelGraph g;
  for (int i = 0; i < n_vertices; ++i) g.add_node({}, {}, "cell");
  for (int i = 0; i < n_vertices; ++i) {
    for (int j = i + 1; j < n_vertices; ++j) {
      if (rng.bernoulli(0.5)) g.add_edge(i, j);
    }
  }
  for (int v = 1; v < n_vertices; ++v) {
    if (g.in_degree(v) == 0) g.add_edge(0, v);
  }
  for (int v = 0; v + 1 < n_vertices; ++v) {
    if (g.out_degree(v) == 0) g.add_edge(v, n_vertices - 1);
  }
  return g;
}

ModelGraph generate_cell_dag(int n_cells, Rng& rng) {
  ModelGraph g;
  const int input = g.add_node({}, {}, "input");
  int tail = input;
  for (int c = 0; c < n_cells; ++c) {
    if (c > 0) {
      const int reduction = g.add_node({}, {}, "reduction");
      g.add_edge(tail, reduction);
      tail = reduction;
    }
    const ModelGraph cell = random_cell(static_cast<int>(rng.uniform_int(2, 6)), rng);
    const int base = g.size();
    for (int v = 0; v < cell.size(); ++v) g.add_node({}, {}, "cell");
    for (const Edge& e : cell.edges) g.add_edge(base + e.src, base + e.dst);
    g.add_edge(tail, base);
    tail = base + cell.size() - 1;
  }
  const int output = g.add_node({}, {}, "output");
  g.add_edge(tail, output);
  return g;
}

namespace {

// Builds the concrete graph node by node. Skeleton vertices keep their ids;
// inserted adapters and the head are appended after them.
class Assigner {
 public:
  Assigner(const ModelGraph& skeleton, const GenerationConfig& cfg,
           LayerUsageStats& stats, Rng& rng)
      : skeleton_(skeleton), cfg_(cfg), stats_(stats), rng_(rng) {
    options_.trigger_bias = cfg.trigger_bias;
    for (const Node& n : skeleton.nodes) out_.add_node({}, {}, n.role);
  }

  AssignedModel run() {
    const ValidationResult v = validate_graph(skeleton_);
    if (!v.ok()) throw Error("invalid skeleton: " + v.to_string());
    const LossKind& loss = select_loss(stats_, rng_, cfg_.loss_kinds);
    const Adjacency adj(skeleton_);
    for (int j : topological_order(skeleton_)) {
      const auto& preds = adj.preds[j];
      if (preds.empty()) {
        set(j, "Input", {}, cfg_.input_shape);
      } else if (preds.size() == 1) {
        assign_single(j, preds[0]);
      } else {
        assign_multi(j, preds);
      }
    }
    const int sink = skeleton_.sinks().front();
    int head = project(sink, cfg_.output_shape, "head", /*always=*/true);
    head = append_head_activation(head, loss);
    check_parameter_budget();
    AssignedModel model{infer_shapes(out_, cfg_.input_shape), loss.name};
    return model;
  }

 private:
  const TensorShape& shape(int id) const { return *out_.nodes[id].shape; }

  void set(int id, const std::string& kind, Params params, TensorShape s) {
    Node& n = out_.nodes[id];
    n.kind = kind;
    n.params = std::move(params);
    n.shape = std::move(s);
  }

  int append(const std::string& kind, Params params, const TensorShape& s,
             const std::string& role, int from) {
    const int id = out_.add_node(kind, std::move(params), role);
    out_.nodes[id].shape = s;
    out_.add_edge(from, id);
    return id;
  }

  bool fits(const TensorShape& s) const {
    return s.is_valid() && s.element_count() <= cfg_.element_budget;
  }

  void assign_single(int j, int pred) {
    const LayerKind& kind =
        select_layer(Arity::kSingle, stats_, rng_, cfg_.excluded_kinds);
    int from = pred;
    TensorShape in = shape(pred);
    if (!kind.accepts_rank(in.rank())) {
      const int rank = kind.input_rank > 0
                           ? kind.input_rank
                           : static_cast<int>(rng_.uniform_int(2, TensorShape::kMaxRank));
      TensorShape target(random_factorization(in.element_count(), rank, rng_));
      from = append("Reshape", Params{{"target_shape", target.dims()}}, target,
                    "adapter", from);
      in = target;
    }
    const TensorShape inputs[] = {in};
    for (int attempt = 0; attempt < kParamAttempts; ++attempt) {
      Params p = kind.sample(in, rng_, options_);
      TensorShape out;
      try {
        out = kind.shape_rule(inputs, p);
      } catch (const ShapeRuleViolation&) {
        continue;
      }
      if (!fits(out)) continue;
      set(j, kind.name, std::move(p), out);
      out_.add_edge(from, j);
      return;
    }
    throw GenerationRetry("no legal parameters for " + kind.name + " on " +
                          in.to_string());
  }

  void assign_multi(int j, const std::vector<int>& preds) {
    const LayerKind& kind =
        select_layer(Arity::kMulti, stats_, rng_, cfg_.excluded_kinds);
    std::vector<TensorShape> candidates;
    for (int p : preds) candidates.push_back(shape(p));
    for (int attempt = 0; attempt < kParamAttempts; ++attempt) {
      TensorShape target =
          attempt < kParamAttempts / 2
              ? rng_.pick(candidates)
              : TensorShape({rng_.uniform_int(1, 8)});
      const std::vector<TensorShape> inputs(preds.size(), target);
      Params p = kind.sample(target, rng_, options_);
      TensorShape out;
      try {
        out = kind.shape_rule(inputs, p);
      } catch (const ShapeRuleViolation&) {
        continue;
      }
      if (!fits(out)) continue;
      set(j, kind.name, std::move(p), out);
      for (int pred : preds) {
        const int last = project(pred, target, "adapter", /*always=*/false);
        out_.add_edge(last, j);
      }
      return;
    }
    throw GenerationRetry("no common shape for " + kind.name);
  }

  // Appends nodes carrying `from`'s output onto `target`; returns the last
  // one. Equal element counts need a Reshape only; otherwise
  // [Flatten] -> Dense(count) -> [Reshape].
  int project(int from, const TensorShape& target, const std::string& role,
              bool always) {
    const TensorShape s = shape(from);
    if (s == target && !always) return from;
    if (s.element_count() == target.element_count()) {
      return append("Reshape", Params{{"target_shape", target.dims()}}, target,
                    role, from);
    }
    int cur = from;
    if (s.rank() > 1) {
      cur = append("Flatten", {}, TensorShape({s.element_count()}), role, cur);
    }
    const int64_t units = target.element_count();
    cur = append("Dense", Params{{"units", units}}, TensorShape({units}), role,
                 cur);
    if (target.rank() > 1) {
      cur = append("Reshape", Params{{"target_shape", target.dims()}}, target,
                   role, cur);
    }
    return cur;
  }

  int append_head_activation(int from, const LossKind& loss) {
    HeadActivation head = loss.head;
    if (cfg_.trigger_bias && (loss.name == "binary_crossentropy" ||
                              loss.name == "categorical_hinge")) {
      head = HeadActivation::kHardSigmoid;
    }
    const TensorShape s = shape(from);
    switch (head) {
      case HeadActivation::kNone:
        return from;
      case HeadActivation::kSoftmax:
        return append("Softmax", {}, s, "head", from);
      case HeadActivation::kSigmoid:
        return append("Activation", Params{{"activation", std::string("sigmoid")}},
                      s, "head", from);
      case HeadActivation::kHardSigmoid:
        return append("Activation",
                      Params{{"activation", std::string("hard_sigmoid")}}, s,
                      "head", from);
    }
    return from;
  }

  void check_parameter_budget() const {
    const Adjacency adj(out_);
    int64_t total = 0;
    for (const Node& n : out_.nodes) {
      std::vector<TensorShape> ins;
      for (int p : adj.preds[n.id]) ins.push_back(*out_.nodes[p].shape);
      for (const auto& w : layer_kind(n.kind).weight_shapes(ins, n.params)) {
        total += Tensor<float>::count_of(w);
      }
    }
    if (total > cfg_.parameter_budget) {
      throw GenerationRetry("model exceeds the parameter budget");
    }
  }

  const ModelGraph& skeleton_;
  const GenerationConfig& cfg_;
  LayerUsageStats& stats_;
  Rng& rng_;
  SampleOptions options_;
  ModelGraph out_;
};

}  // namespace

AssignedModel assign_layers(const ModelGraph& skeleton,
                            const GenerationConfig& cfg,
                            LayerUsageStats& stats, Rng& rng) {
  LayerUsageStats working = stats;
  AssignedModel model = Assigner(skeleton, cfg, working, rng).run();
  stats = std::move(working);
  return model;
}

std::string model_id_for(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "m%05d", index);
  return buf;
}

ModelSpec materialize_model(const AssignedModel& model,
                            const GenerationConfig& cfg, int index,
                            uint64_t model_seed) {
  ModelSpec spec;
  spec.model_id = model_id_for(index);
  spec.seed = model_seed;
  spec.batch_size = cfg.batch_size;
  spec.loss = model.loss;
  spec.input_shape = cfg.input_shape;
  spec.output_shape = cfg.output_shape;
  spec.graph = model.graph;
  spec.weights = initial_weights(spec.graph, model_seed, cfg.trigger_bias);

  spec.input_batch = Tensor<float>(batched(cfg.batch_size, cfg.input_shape));
  for (int64_t e = 0; e < spec.input_batch.size(); ++e) {
    if (cfg.trigger_bias) {
      spec.input_batch[e] =
          static_cast<float>(static_cast<int>(keyed_bits(model_seed, kInputDomain, 0, e) % 3) - 1);
    } else {
      spec.input_batch[e] = 2.0f * keyed_uniform_half(model_seed, kInputDomain, 0, e);
    }
  }
  std::set<int64_t> nan_positions;
  const int64_t count = spec.input_batch.size();
  for (int k = 0; k < cfg.nan_inputs; ++k) {
    int64_t pos = static_cast<int64_t>(keyed_bits(model_seed, kNanDomain, k, 0) %
                                       static_cast<uint64_t>(count));
    while (nan_positions.count(pos)) pos = (pos + 1) % count;
    nan_positions.insert(pos);
    spec.input_batch[pos] = std::numeric_limits<float>::quiet_NaN();
  }

  spec.labels = Tensor<float>(batched(cfg.batch_size, cfg.output_shape));
  const int64_t classes = cfg.output_shape.back();
  const int64_t rows = spec.labels.size() / classes;
  if (model.loss == "categorical_crossentropy" || model.loss == "categorical_hinge") {
    for (int64_t r = 0; r < rows; ++r) {
      const uint64_t hot = keyed_bits(model_seed, kLabelDomain, r, 0) %
                           static_cast<uint64_t>(classes);
      spec.labels[r * classes + static_cast<int64_t>(hot)] = 1.0f;
    }
  } else {
    for (int64_t e = 0; e < spec.labels.size(); ++e) {
      const float u = keyed_uniform_half(model_seed, kLabelDomain, 1, e) + 0.5f;
      if (model.loss == "binary_crossentropy") {
        spec.labels[e] = (keyed_bits(model_seed, kLabelDomain, 2, e) & 1) ? 1.0f : 0.0f;
      } else if (model.loss == "mean_absolute_percentage_error") {
        // Keep targets away from zero, where the percentage blows up.
        const float sign = (keyed_bits(model_seed, kLabelDomain, 2, e) & 1) ? 1.0f : -1.0f;
        spec.labels[e] = sign * (0.5f + u);
      } else {
        spec.labels[e] = 2.0f * u - 1.0f;
      }
    }
  }
  check_model_spec(spec);
  return spec;
}

GenerationResult generate_models(const GenerationConfig& cfg) {
  cfg.validate();
  GenerationResult result;
  Rng rng(cfg.seed);
  for (int index = 0; index < cfg.n_models; ++index) {
    int failures = 0;
    AssignedModel model;
    while (true) {
      const ModelGraph skeleton =
          rng.bernoulli(cfg.p_chain)
              ? generate_chain_dag(static_cast<int>(rng.uniform_int(1, cfg.max_vertices)),
                                   cfg.p_skip, rng)
              : generate_cell_dag(static_cast<int>(rng.uniform_int(1, cfg.max_cells)), rng);
      try {
        model = assign_layers(skeleton, cfg, result.stats, rng);
        break;
      } catch (const GenerationRetry&) {
        ++result.retries;
        if (++failures >= kMaxConsecutiveFailures) {
          throw Error("generation failed " + std::to_string(failures) +
                      " times in a row; the configuration admits no model");
        }
      }
    }
    const uint64_t model_seed =
        keyed_bits(cfg.seed, kModelSeedDomain, static_cast<uint64_t>(index), 0);
    result.models.push_back(materialize_model(model, cfg, index, model_seed));
  }
  return result;
}

}  // namespace archfuzz
