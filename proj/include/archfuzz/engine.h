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

#ifndef ARCHFUZZ_ENGINE_H_
#define ARCHFUZZ_ENGINE_H_

#include <string>
#include <vector>

#include "archfuzz/model_spec.h"
#include "archfuzz/trace.h"

namespace archfuzz {

// A backend id is "naive", "reordered", or "<base>+<fault>" where base is one
// of those two and fault names a seeded fault class.
struct BackendSpec {
  std::string id;
  std::string base;
  std::string fault;  // empty for honest backends
  bool reordered() const { return base == "reordered"; }
};

BackendSpec parse_backend_id(const std::string& id);  // throws Error

// The six shipped fault classes.
const std::vector<std::string>& fault_classes();
// Test-only faults: "none", "debug-abort" (aborts the process),
// "debug-sleep" (hangs), "debug-throw" (raises an error whose message carries
// an address and a path).
const std::vector<std::string>& debug_faults();

// Honest backends plus one naive-based mutant per shipped fault class.
std::vector<std::string> list_backends();

// Runs one training step (forward, loss, backward) at f32 and records the
// trace. Errors raised by kernels become a crash outcome; any non-finite
// value in a completed run makes the outcome nan. Debug faults that abort or
// hang do so for real, so run them in a child process.
TraceBundle run_backend(const std::string& backend_id, const ModelSpec& spec);

// Element-wise binary cross-entropy of one probability against one target,
// as the honest kernel (or, with redundant_epsilon, the faulty one) computes
// it.
float binary_crossentropy_element(float output, float target,
                                  bool redundant_epsilon);

struct GradientCheckOptions {
  std::string backend = "naive";
  // Ridders' extrapolation starts at coarse_step and shrinks it; `step` is
  // the single-difference fallback near kinks. Both scale with max(1, |x|).
  double coarse_step = 2e-2;
  double step = 1e-5;
  // Elements checked per node input; larger tensors are sampled.
  int max_elements_per_input = 16;
  // Lower bound on the error normalizer, so all-but-zero gradients do not
  // turn rounding noise into large relative errors.
  double scale_floor = 1e-3;
  uint64_t sample_seed = 0;
};

struct InputGradientCheck {
  int node = 0;
  int input = 0;
  int64_t checked = 0;
  // Elements skipped because the perturbation crossed a kink (a ReLU sign,
  // an argmax, a clip boundary).
  int64_t excluded = 0;
  double max_abs_error = 0;
  double scale = 0;
  double rel_error = 0;
};

struct GradientCheckReport {
  bool evaluable = true;  // false when the backend run is not ok
  std::string reason;
  std::vector<InputGradientCheck> inputs;
  double max_rel_error = 0;
  int64_t checked = 0;
  int64_t excluded = 0;
};

// Compares the backend's f32 BC gradients against f64 central finite
// differences of the loss.
GradientCheckReport check_gradients(const ModelSpec& spec,
                                    const GradientCheckOptions& options);

}  // namespace archfuzz

#endif  // ARCHFUZZ_ENGINE_H_
