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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "archfuzz/engine.h"
#include "archfuzz/errors.h"
#include "executor.h"
#include "kernels.h"

namespace archfuzz {

const std::vector<std::string>& fault_classes() {
  static const std::vector<std::string> faults{
      "relu-eq-zero",         "pooling-location", "bce-epsilon-clip",
      "maxpool-tie-gradient", "hinge-no-divide",  "globalmaxpool-neginf-on-nan"};
  return faults;
}

const std::vector<std::string>& debug_faults() {
  static const std::vector<std::string> faults{"none", "debug-abort",
                                               "debug-sleep", "debug-throw"};
  return faults;
}

BackendSpec parse_backend_id(const std::string& id) {
  BackendSpec spec;
  spec.id = id;
  const size_t plus = id.find('+');
  spec.base = id.substr(0, plus);
  if (spec.base != "naive" && spec.base != "reordered") {
    throw Error("unknown backend '" + id + "'");
  }
  if (plus != std::string::npos) {
    spec.fault = id.substr(plus + 1);
    bool known = false;
    for (const auto* list : {&fault_classes(), &debug_faults()}) {
      for (const std::string& f : *list) known |= f == spec.fault;
    }
    if (!known) throw Error("unknown fault class '" + spec.fault + "' in backend '" + id + "'");
  }
  return spec;
}

std::vector<std::string> list_backends() {
  std::vector<std::string> out{"naive", "reordered"};
  for (const std::string& f : fault_classes()) out.push_back("naive+" + f);
  return out;
}

namespace engine {
namespace {

// Debug faults fire in the first non-Input layer, after the model has
// started executing. The messages carry an address, a path and a line number
// so crash normalization has something to strip.
template <typename T>
void wrap_with_debug_fault(LayerKernel<T>& k, const std::string& fault) {
  ForwardFn<T> inner = std::move(k.forward);
  k.forward = [fault, inner](const LayerCall<T>& c) -> Tensor<T> {
    const std::string& kind = c.node->kind;
    if (fault == "debug-abort") {
      std::fprintf(stderr, "fatal: kernel invariant violated in %s at %p\n", kind.c_str(),
                   static_cast<const void*>(&c));
      std::fflush(stderr);
      std::abort();
    }
    if (fault == "debug-sleep") std::this_thread::sleep_for(std::chrono::hours(1));
    if (fault == "debug-throw") {
      throw Error("simulated kernel failure in " + kind +
                  " at 0x7ffd5e3a9c10 (/tmp/kernels/layer.cc:42)");
    }
    return inner(c);
  };
}

template <typename T>
KernelTable<T> build_table(const std::string& fault) {
  KernelTable<T> table = honest_layer_kernels<T>();
  add_honest_losses(table);
  if (fault.empty() || fault == "none") return table;
  if (fault.rfind("debug-", 0) == 0) {
    for (auto& [kind, kernel] : table.layers) {
      if (kind != "Input") wrap_with_debug_fault(kernel, fault);
    }
    return table;
  }
  if (!apply_layer_fault(table, fault) && !apply_loss_fault(table, fault)) {
    throw Error("unknown fault class '" + fault + "'");
  }
  return table;
}

}  // namespace

// Tables are immutable once built and shared across runs.
template <typename T>
const KernelTable<T>& kernel_table(const std::string& fault) {
  static std::mutex mu;
  static std::map<std::string, std::unique_ptr<KernelTable<T>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[fault];
  if (!slot) slot = std::make_unique<KernelTable<T>>(build_table<T>(fault));
  return *slot;
}

template const KernelTable<float>& kernel_table<float>(const std::string&);
template const KernelTable<double>& kernel_table<double>(const std::string&);

}  // namespace engine

namespace {

bool all_finite(const Tensor<float>& t) {
  for (float v : t.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

TraceBundle run_backend(const std::string& backend_id, const ModelSpec& spec) {
  const BackendSpec backend = parse_backend_id(backend_id);
  TraceBundle bundle;
  bundle.backend_id = backend_id;
  bundle.model_id = spec.model_id;
  bundle.loss = spec.loss;
  bundle.precision = "f32";
  const Adjacency adj(spec.graph);
  for (const Node& n : spec.graph.nodes) {
    bundle.nodes.push_back({n.id, n.kind, adj.preds[n.id]});
  }
  const int n = spec.graph.size();
  bundle.fc.assign(n, std::nullopt);
  bundle.bc.assign(n, {});

  engine::ForwardState<float> fwd;
  try {
    const auto& table = engine::kernel_table<float>(backend.fault);
    const engine::Executor<float> ex(spec, table, backend.reordered());
    try {
      ex.forward(fwd, false);
    } catch (...) {
      for (int i = 0; i < n && i < static_cast<int>(fwd.out.size()); ++i) {
        if (!fwd.out[i].data.empty()) bundle.fc[i] = fwd.out[i];
      }
      throw;
    }
    for (int i = 0; i < n; ++i) bundle.fc[i] = fwd.out[i];
    bundle.lo = Tensor<float>({1}, std::vector<float>{fwd.loss});
    engine::BackwardState<float> bwd = ex.backward(fwd);
    bundle.lg = std::move(bwd.loss_grad);
    bundle.bc = std::move(bwd.grads);
  } catch (const std::exception& e) {
    bundle.outcome = Outcome::kCrash;
    bundle.message = e.what();
    return bundle;
  }

  bool finite = all_finite(*bundle.lo) && all_finite(*bundle.lg);
  for (int i = 0; i < n && finite; ++i) {
    finite = all_finite(*bundle.fc[i]);
    for (const auto& g : bundle.bc[i]) finite = finite && all_finite(g);
  }
  if (!finite) {
    bundle.outcome = Outcome::kNan;
    bundle.message = "non-finite values in trace";
  }
  return bundle;
}

}  // namespace archfuzz
