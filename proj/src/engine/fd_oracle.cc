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

// Finite-difference gradient oracle: central differences of the f64 network
// with respect to each node input, compared against a backend's f32 BC trace.
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "archfuzz/engine.h"
#include "archfuzz/rng.h"
#include "executor.h"
#include "kernels.h"

namespace archfuzz {

namespace {

// Elements to check: every element of small tensors; otherwise the largest
// |g| entry plus a keyed random sample.
std::vector<int64_t> pick_elements(const Tensor<float>& g, int limit,
                                   uint64_t seed, int node, int input) {
  std::vector<int64_t> out;
  const int64_t n = g.size();
  if (n <= limit) {
    for (int64_t e = 0; e < n; ++e) out.push_back(e);
    return out;
  }
  std::set<int64_t> chosen;
  int64_t largest = 0;
  for (int64_t e = 1; e < n; ++e) {
    if (std::abs(g[e]) > std::abs(g[largest])) largest = e;
  }
  chosen.insert(largest);
  for (uint64_t k = 0; static_cast<int>(chosen.size()) < limit; ++k) {
    chosen.insert(static_cast<int64_t>(keyed_bits(seed, node, input, k) % n));
  }
  return {chosen.begin(), chosen.end()};
}

}  // namespace

GradientCheckReport check_gradients(const ModelSpec& spec,
                                    const GradientCheckOptions& options) {
  GradientCheckReport report;
  const TraceBundle trace = run_backend(options.backend, spec);
  if (trace.outcome != Outcome::kOk) {
    report.evaluable = false;
    report.reason = "backend outcome " + std::string(outcome_name(trace.outcome)) +
                    (trace.message.empty() ? "" : ": " + trace.message);
    return report;
  }
  // The oracle always evaluates the honest naive formulas in f64.
  const auto& table = engine::kernel_table<double>("");
  const engine::Executor<double> ex(spec, table, false);
  engine::ForwardState<double> base;
  ex.forward(base, true);
  if (!std::isfinite(base.loss)) {
    report.evaluable = false;
    report.reason = "non-finite f64 loss";
    return report;
  }

  // Differencing the scalar loss loses every digit once the loss dwarfs the
  // change a single element makes (a percentage loss over a tiny label can sit
  // near 1e19). So the sink output is differenced instead, each element at its
  // own scale, and chained with the exact f64 loss gradient. Loss-side kinks
  // still show up through the loss branch hash.
  const Tensor<double> loss_grad = ex.backward(base).loss_grad;

  std::vector<uint64_t> decisions;
  uint64_t loss_decisions = 0;
  Tensor<double> out[2];
  for (int node : ex.order()) {
    const std::vector<char> affected = ex.descendants(node);
    const auto inputs = ex.inputs_of(node, base.out);
    for (size_t k = 0; k < inputs.size(); ++k) {
      const Tensor<float>& g = trace.bc[node][k];
      const Tensor<double>& x = *inputs[k];
      InputGradientCheck check;
      check.node = node;
      check.input = static_cast<int>(k);

      // Central difference at step h; false if either side crosses a branch.
      auto central = [&](int64_t e, double h, double& fd) {
        for (int side = 0; side < 2; ++side) {
          const double value = x[e] + (side == 0 ? h : -h);
          ex.perturbed_loss(base, affected, node, static_cast<int>(k), e, value, decisions,
                            loss_decisions, &out[side]);
          if (loss_decisions != base.loss_decisions) return false;
          for (int id = 0; id < static_cast<int>(decisions.size()); ++id) {
            if (affected[id] && decisions[id] != base.decisions[id]) return false;
          }
        }
        fd = 0;
        for (int64_t j = 0; j < loss_grad.size(); ++j) {
          fd += loss_grad[j] * ((out[0][j] - out[1][j]) / (2 * h));
        }
        return true;
      };

      // Ridders' extrapolation over a shrinking step. Long multiplicative
      // chains make the outputs so large that any fixed small step drowns in
      // roundoff, while a fixed large one carries truncation error; the
      // tableau keeps whichever estimate its own error bound rates best. A
      // step that crosses a branch restarts the tableau at the next smaller
      // step. False when no two consecutive steps were kink-free.
      auto ridders = [&](int64_t e, double h0, double& best) {
        constexpr int kTable = 10;
        constexpr double kShrink = 1.4;
        constexpr double kSafe = 2.0;
        double a[kTable][kTable];
        double err = std::numeric_limits<double>::infinity();
        bool found = false;
        int first = 0;  // first column of the live tableau
        double h = h0;
        for (int i = 0; i < kTable; ++i, h /= kShrink) {
          if (!central(e, h, a[0][i])) {
            first = i + 1;
            continue;
          }
          double fac = kShrink * kShrink;
          for (int j = 1; j <= i - first; ++j) {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1);
            fac *= kShrink * kShrink;
            const double e_ij = std::max(std::abs(a[j][i] - a[j - 1][i]),
                                         std::abs(a[j][i] - a[j - 1][i - 1]));
            if (e_ij <= err) {
              err = e_ij;
              best = a[j][i];
              found = true;
            }
          }
          const int d = i - first;
          if (d >= 1 && std::abs(a[d][i] - a[d - 1][i - 1]) >= kSafe * err) break;
        }
        return found;
      };

      double g_max = 0;
      for (float v : g.data) g_max = std::max(g_max, static_cast<double>(std::abs(v)));
      double fd_max = 0;
      for (int64_t e : pick_elements(g, options.max_elements_per_input,
                                     options.sample_seed, node, static_cast<int>(k))) {
        const double unit = std::max(1.0, std::abs(x[e]));
        double fd = 0;
        if (!ridders(e, options.coarse_step * unit, fd) &&
            !central(e, options.step * unit, fd)) {
          ++check.excluded;
          continue;
        }
        fd_max = std::max(fd_max, std::abs(fd));
        check.max_abs_error = std::max(check.max_abs_error, std::abs(fd - g[e]));
        ++check.checked;
      }
      check.scale = std::max({g_max, fd_max, options.scale_floor});
      check.rel_error = check.max_abs_error / check.scale;
      report.max_rel_error = std::max(report.max_rel_error, check.rel_error);
      report.checked += check.checked;
      report.excluded += check.excluded;
      report.inputs.push_back(check);
    }
  }
  return report;
}

}  // namespace archfuzz
