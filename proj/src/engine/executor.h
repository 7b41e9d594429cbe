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

// Graph executor shared by the backends and the finite-difference oracle.
#ifndef ARCHFUZZ_SRC_ENGINE_EXECUTOR_H_
#define ARCHFUZZ_SRC_ENGINE_EXECUTOR_H_

#include <vector>

#include "archfuzz/errors.h"
#include "archfuzz/graph.h"
#include "archfuzz/model_spec.h"
#include "kernels.h"

namespace archfuzz::engine {

template <typename T>
struct ForwardState {
  std::vector<Tensor<T>> out;         // per node; empty until computed
  std::vector<uint64_t> decisions;    // per node branch hash
  uint64_t loss_decisions = 0;
  T loss = 0;
  bool has_loss = false;
};

template <typename T>
struct BackwardState {
  Tensor<T> loss_grad;                       // dL / d(sink output)
  std::vector<std::vector<Tensor<T>>> grads;  // per node, per input
};

template <typename T>
class Executor {
 public:
  Executor(const ModelSpec& spec, const KernelTable<T>& table, bool reordered)
      : spec_(spec),
        table_(table),
        reordered_(reordered),
        graph_(infer_shapes(spec.graph, spec.input_shape)),
        adj_(graph_) {
    order_ = topological_order(graph_);
    sink_ = graph_.sinks().front();
    input_ = spec.input_batch.template cast<T>();
    labels_ = spec.labels.template cast<T>();
    for (const auto& ws : spec.weights) {
      std::vector<Tensor<T>> cast;
      for (const Tensor<float>& w : ws) cast.push_back(w.template cast<T>());
      weights_.push_back(std::move(cast));
    }
  }

  const std::vector<int>& order() const { return order_; }
  const Adjacency& adjacency() const { return adj_; }
  int sink() const { return sink_; }
  const Tensor<T>& input() const { return input_; }

  // Runs every node and the loss, filling `state` as it goes so a kernel
  // error leaves the completed prefix in place.
  void forward(ForwardState<T>& state, bool record_decisions) const {
    const int n = graph_.size();
    state.out.assign(n, Tensor<T>());
    state.decisions.assign(n, 0);
    state.has_loss = false;
    for (int id : order_) {
      const std::vector<const Tensor<T>*> in = inputs_of(id, state.out);
      state.out[id] = run_node(id, in, record_decisions ? &state.decisions[id] : nullptr);
    }
    state.loss_decisions = 0;
    state.loss = loss_kernel().value(state.out[sink_], labels_, reordered_,
                                     record_decisions ? &state.loss_decisions : nullptr);
    state.has_loss = true;
  }

  BackwardState<T> backward(const ForwardState<T>& state) const {
    const int n = graph_.size();
    BackwardState<T> b;
    b.loss_grad = loss_kernel().grad(state.out[sink_], labels_, reordered_);
    b.grads.assign(n, {});
    std::vector<Tensor<T>> dout(n);
    dout[sink_] = b.loss_grad;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      const int id = *it;
      const std::vector<const Tensor<T>*> in = inputs_of(id, state.out);
      LayerCall<T> call = make_call(id, in, nullptr);
      if (dout[id].data.empty()) dout[id] = Tensor<T>(state.out[id].dims);
      b.grads[id] = kernel(id).backward(call, state.out[id], dout[id]);
      const auto& preds = adj_.preds[id];
      for (size_t k = 0; k < preds.size(); ++k) {
        Tensor<T>& acc = dout[preds[k]];
        const Tensor<T>& g = b.grads[id][k];
        if (acc.data.empty()) {
          acc = g;
        } else {
          for (int64_t e = 0; e < acc.size(); ++e) acc[e] += g[e];
        }
      }
      dout[id] = Tensor<T>();  // no longer needed
    }
    return b;
  }

  // Loss after replacing element `elem` of node `node`'s input `input` by
  // `value`; only `node` and its descendants are recomputed. `decisions`
  // receives the recomputed nodes' branch hashes (others keep the base's),
  // and `sink_out`, when given, the perturbed sink output.
  T perturbed_loss(const ForwardState<T>& base, const std::vector<char>& affected,
                   int node, int input, int64_t elem, T value,
                   std::vector<uint64_t>& decisions, uint64_t& loss_decisions,
                   Tensor<T>* sink_out = nullptr) const {
    std::vector<Tensor<T>> scratch(graph_.size());
    std::vector<const Tensor<T>*> view(graph_.size());
    for (int i = 0; i < graph_.size(); ++i) view[i] = &base.out[i];
    decisions = base.decisions;
    for (int id : order_) {
      if (!affected[id]) continue;
      std::vector<const Tensor<T>*> in = inputs_from(id, view);
      Tensor<T> replaced;
      if (id == node) {
        replaced = *in[input];
        replaced[elem] = value;
        in[input] = &replaced;
      }
      decisions[id] = 0;
      scratch[id] = run_node(id, in, &decisions[id]);
      view[id] = &scratch[id];
    }
    loss_decisions = 0;
    if (sink_out) *sink_out = *view[sink_];
    return loss_kernel().value(*view[sink_], labels_, reordered_, &loss_decisions);
  }

  // Node itself plus everything reachable from it.
  std::vector<char> descendants(int node) const {
    std::vector<char> mark(graph_.size(), 0);
    mark[node] = 1;
    for (int id : order_) {
      if (!mark[id]) continue;
      for (int s : adj_.succs[id]) mark[s] = 1;
    }
    return mark;
  }

  std::vector<const Tensor<T>*> inputs_of(int id, const std::vector<Tensor<T>>& out) const {
    if (adj_.preds[id].empty()) return {&input_};
    std::vector<const Tensor<T>*> in;
    for (int p : adj_.preds[id]) in.push_back(&out[p]);
    return in;
  }

 private:
  std::vector<const Tensor<T>*> inputs_from(int id,
                                            const std::vector<const Tensor<T>*>& view) const {
    if (adj_.preds[id].empty()) return {&input_};
    std::vector<const Tensor<T>*> in;
    for (int p : adj_.preds[id]) in.push_back(view[p]);
    return in;
  }

  const LayerKernel<T>& kernel(int id) const {
    const std::string& kind = graph_.nodes[id].kind;
    auto it = table_.layers.find(kind);
    if (it == table_.layers.end()) throw Error("unsupported: " + kind);
    return it->second;
  }

  const LossKernel<T>& loss_kernel() const {
    auto it = table_.losses.find(spec_.loss);
    if (it == table_.losses.end()) throw Error("unsupported: " + spec_.loss);
    return it->second;
  }

  LayerCall<T> make_call(int id, const std::vector<const Tensor<T>*>& in,
                         uint64_t* decisions) const {
    const Node& node = graph_.nodes[id];
    LayerCall<T> call;
    call.node = &node;
    call.in = in;
    if (adj_.preds[id].empty()) {
      call.in_shapes = {spec_.input_shape};
    } else {
      for (int p : adj_.preds[id]) call.in_shapes.push_back(*graph_.nodes[p].shape);
    }
    call.out_shape = *node.shape;
    call.weights = &weights_[id];
    call.batch = spec_.batch_size;
    call.reordered = reordered_;
    call.decisions = decisions;
    return call;
  }

  Tensor<T> run_node(int id, const std::vector<const Tensor<T>*>& in,
                     uint64_t* decisions) const {
    return kernel(id).forward(make_call(id, in, decisions));
  }

  const ModelSpec& spec_;
  const KernelTable<T>& table_;
  bool reordered_;
  ModelGraph graph_;  // with inferred shapes
  Adjacency adj_;
  std::vector<int> order_;
  int sink_ = 0;
  Tensor<T> input_;
  Tensor<T> labels_;
  std::vector<std::vector<Tensor<T>>> weights_;
};

}  // namespace archfuzz::engine

#endif  // ARCHFUZZ_SRC_ENGINE_EXECUTOR_H_
