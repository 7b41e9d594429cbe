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

#ifndef ARCHFUZZ_DETECTOR_H_
#define ARCHFUZZ_DETECTOR_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "archfuzz/tensor.h"
#include "archfuzz/trace.h"

namespace archfuzz {

struct DetectorConfig {
  double t = 0.15;         // inconsistency threshold
  double epsilon = 1e-5;   // benign-deviation bound
  // Multiply t by the loss kind's output scale for LC comparisons. Off by
  // default.
  bool scale_lc_by_loss = false;

  void validate() const;  // throws ConfigError unless 0 < epsilon < t
};

struct Distance {
  double value = 0;
  bool nan_tainted = false;
};

// Max over elements of |x - y|. A NaN in either operand at any position
// taints the result. Throws Error on a shape mismatch.
Distance chebyshev(const Tensor<float>& x, const Tensor<float>& y);

enum class Stage { kFC, kLC, kBC };
std::string_view stage_name(Stage s);

// Raw cross-backend distances for one model. Missing entries are nullopt.
struct PairComparison {
  std::string backend_a;
  std::string backend_b;
  std::vector<std::optional<Distance>> fc;               // per node
  std::vector<std::vector<std::optional<Distance>>> bc;  // per node, per input
  std::optional<Distance> lo;
  std::optional<Distance> lg;

  // Max over a node's inputs; nullopt if any input is missing.
  std::optional<Distance> bc_node(int node) const;
};

// Both bundles must describe the same graph; throws Error otherwise.
PairComparison compare_pair(const TraceBundle& a, const TraceBundle& b);

struct GateDistance {
  int node = -1;  // -1 names the loss (LO for BC, LG for the sink in BC)
  double distance = 0;
};

struct Finding {
  Stage stage = Stage::kFC;
  std::string model_id;
  int node_id = -1;   // -1 for LC
  std::string kind;   // layer kind, or loss kind for LC
  std::string backend_a;  // the pair in lexicographic order
  std::string backend_b;
  double distance = 0;
  double lo_diff = 0;      // LC only
  double lg_distance = 0;  // LC only
  std::vector<GateDistance> gate;
  // Filled by deduplicate().
  int64_t count = 1;
  std::vector<std::string> models;
};

struct DataGap {
  std::string model_id;
  Stage stage = Stage::kFC;
  int node_id = -1;
  std::string reason;
};

struct StageResult {
  std::vector<Finding> findings;
  std::vector<DataGap> gaps;
};

// The three predicates. `a` and `b` must both have outcome ok; otherwise the
// result is empty with one gap entry.
StageResult detect_fc(const TraceBundle& a, const TraceBundle& b,
                      const PairComparison& pc, const DetectorConfig& cfg);
StageResult detect_lc(const TraceBundle& a, const TraceBundle& b,
                      const PairComparison& pc, const DetectorConfig& cfg);
StageResult detect_bc(const TraceBundle& a, const TraceBundle& b,
                      const PairComparison& pc, const DetectorConfig& cfg);
// All three stages for one pair.
StageResult detect_pair(const TraceBundle& a, const TraceBundle& b,
                        const DetectorConfig& cfg);

struct NanEvent {
  std::string model_id;
  std::string stage;  // "forward", "loss", "loss-gradient" or "backward"
  int node_id = -1;
  std::string kind;
  std::vector<std::string> affected;
  std::vector<std::string> healthy;
  std::string implicated;  // the singleton side, if any
  int64_t count = 1;
  std::vector<std::string> models;
};

struct CrashEvent {
  std::string normalized_message;
  std::string message;  // first raw message seen
  std::vector<std::string> crashed;
  std::vector<std::string> survived;
  int64_t count = 1;
  std::vector<std::string> models;
};

// Replaces hex addresses, filesystem paths and decimal numbers so crashes
// that differ only in those compare equal.
std::string normalize_crash_message(const std::string& message);

struct NanCrashResult {
  std::vector<NanEvent> nan_events;
  std::vector<CrashEvent> crash_events;
};

// Classifies non-ok outcomes of one model's bundles (one per backend).
NanCrashResult classify_nan_crash(const std::vector<TraceBundle>& bundles);

struct Vote {
  Stage stage = Stage::kFC;
  std::string kind;
  std::string implicated;  // empty when ambiguous
  bool ambiguous = true;
  int64_t occurrences = 0;
  std::map<std::string, int64_t> tally;  // per-occurrence implicated backend
};

// Per-occurrence vote: with pairwise distances at the flagged location, the
// backend that disagrees (distance > t) with every other backend while all
// pairs without it agree (distance <= t). Empty when no backend qualifies.
std::string vote_occurrence(const std::vector<std::string>& backends,
                            const std::map<std::pair<std::string, std::string>,
                                           std::optional<Distance>>& distances,
                            double t);

// Collapses findings to one per (stage, kind, backend pair), keeping the
// max-distance exemplar and an occurrence count.
std::vector<Finding> deduplicate(const std::vector<Finding>& findings);

// Analysis of one model across all its backends.
struct ModelAnalysis {
  std::string model_id;
  std::vector<std::string> backends;
  std::vector<Finding> findings;
  std::vector<DataGap> gaps;
  NanCrashResult nan_crash;
  // One vote per flagged (stage, node), keyed "stage|kind".
  std::vector<std::pair<std::string, std::string>> occurrence_votes;
  int64_t unevaluable_pairs = 0;
};

ModelAnalysis analyze_model(const std::vector<TraceBundle>& bundles,
                            const DetectorConfig& cfg);

struct InconsistencyReport {
  DetectorConfig config;
  std::vector<std::string> backends;
  int64_t models = 0;
  int64_t raw_findings = 0;
  int64_t unevaluable_pairs = 0;
  std::vector<Finding> findings;  // deduplicated
  std::vector<Vote> votes;
  std::vector<NanEvent> nan_events;
  std::vector<CrashEvent> crash_events;
  std::vector<DataGap> gaps;

  // Findings and crash events fail a run; NaN events are reported only.
  bool has_issues() const { return !findings.empty() || !crash_events.empty(); }
};

// Accumulates per-model analyses; the result does not depend on the order in
// which models are added.
class ReportBuilder {
 public:
  explicit ReportBuilder(DetectorConfig cfg) : cfg_(cfg) {}
  void add(const ModelAnalysis& analysis);
  InconsistencyReport finish() const;

 private:
  DetectorConfig cfg_;
  std::vector<std::string> backends_;
  int64_t models_ = 0;
  int64_t unevaluable_ = 0;
  std::vector<Finding> findings_;
  std::vector<DataGap> gaps_;
  std::vector<NanEvent> nan_events_;
  std::vector<CrashEvent> crash_events_;
  std::vector<std::pair<std::string, std::string>> votes_;
};

std::string report_to_json(const InconsistencyReport& report);
std::string report_to_text(const InconsistencyReport& report);

}  // namespace archfuzz

#endif  // ARCHFUZZ_DETECTOR_H_
