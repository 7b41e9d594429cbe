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

#ifndef ARCHFUZZ_TRACE_H_
#define ARCHFUZZ_TRACE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "archfuzz/errors.h"
#include "archfuzz/tensor.h"

namespace archfuzz {

inline constexpr uint32_t kTraceFormatVersion = 1;
inline constexpr char kTraceMagic[4] = {'A', 'F', 'T', 'R'};

enum class Outcome { kOk, kNan, kCrash };

std::string_view outcome_name(Outcome o);
Outcome parse_outcome(std::string_view name);  // throws Error

struct TraceNode {
  int id = 0;
  std::string kind;
  std::vector<int> preds;  // ascending
  friend bool operator==(const TraceNode&, const TraceNode&) = default;
};

// Everything one backend recorded for one model's training step.
//   fc[i]  output of node i (batched)
//   lo     the loss value, stored as a one-element tensor
//   lg     gradient of the loss w.r.t. the sink output
//   bc[i]  gradients w.r.t. node i's inputs, one per predecessor in `preds`
//          order; for the source node a single entry w.r.t. the input batch
// Missing stages (after a crash) are nullopt / empty.
struct TraceBundle {
  std::string backend_id;
  std::string model_id;
  std::string loss;  // loss kind name
  std::string precision = "f32";
  Outcome outcome = Outcome::kOk;
  std::string message;
  std::vector<TraceNode> nodes;
  std::vector<std::optional<Tensor<float>>> fc;
  std::optional<Tensor<float>> lo;
  std::optional<Tensor<float>> lg;
  std::vector<std::vector<Tensor<float>>> bc;

  // The node without successors, or -1 for an empty bundle.
  int sink() const;
  std::vector<int> successors(int node) const;
};

// Bitwise equality of every field and every float (NaN payloads included).
bool bundles_identical(const TraceBundle& a, const TraceBundle& b);

class TraceError : public Error {
 public:
  enum class Kind { kIo, kManifest, kBlobLength, kVersion };
  TraceError(Kind kind, const std::string& message)
      : Error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Byte-level codec. Layout: magic "AFTR", u32 version, u64 manifest length,
// JSON manifest, then the little-endian f32 blob region.
std::string encode_trace(const TraceBundle& bundle);
TraceBundle decode_trace(std::string_view bytes);

// File wrappers; writing goes through a temporary and a rename.
void write_trace(const TraceBundle& bundle, const std::filesystem::path& path);
TraceBundle read_trace(const std::filesystem::path& path);

}  // namespace archfuzz

#endif  // ARCHFUZZ_TRACE_H_
