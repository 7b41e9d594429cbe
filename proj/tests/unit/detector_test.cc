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

#include "archfuzz/detector.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "archfuzz/engine.h"
#include "archfuzz/errors.h"
#include "archfuzz/generator.h"
#include "json.hpp"

namespace archfuzz {
namespace {

const float kNan = std::numeric_limits<float>::quiet_NaN();

Tensor<float> scalar(float v) { return Tensor<float>({1, 1}, {v}); }

// Chain Input(0) -> Dense(1) -> ReLU(2) with one-element tensors everywhere.
// bc[i] is the gradient node i sends to its input.
struct ChainValues {
  float fc[3] = {0, 0, 0};
  float bc[3] = {0, 0, 0};
  float lo = 0;
  float lg = 0;
};

TraceBundle chain_bundle(const std::string& backend, const ChainValues& v,
                         const std::string& model = "m00000") {
  TraceBundle b;
  b.backend_id = backend;
  b.model_id = model;
  b.loss = "mean_squared_error";
  b.nodes = {{0, "Input", {}}, {1, "Dense", {0}}, {2, "ReLU", {1}}};
  for (int i = 0; i < 3; ++i) {
    b.fc.push_back(scalar(v.fc[i]));
    b.bc.push_back({scalar(v.bc[i])});
  }
  b.lo = Tensor<float>({1}, {v.lo});
  b.lg = scalar(v.lg);
  return b;
}

DetectorConfig defaults() { return DetectorConfig{}; }

TEST(ChebyshevTest, Examples) {
  const Tensor<float> x({3}, {1, 2, 3});
  EXPECT_EQ(chebyshev(x, x).value, 0);
  const Distance d = chebyshev(x, Tensor<float>({3}, {1, 2.5f, 1}));
  EXPECT_EQ(d.value, 2.0);
  EXPECT_FALSE(d.nan_tainted);
  EXPECT_TRUE(chebyshev(Tensor<float>({1}, {0}), Tensor<float>({1}, {kNan})).nan_tainted);
  EXPECT_THROW(chebyshev(x, Tensor<float>({2}, {1, 2})), Error);
  // Infinities of opposite sign are infinitely far apart, not NaN.
  const float inf = std::numeric_limits<float>::infinity();
  const Distance far = chebyshev(Tensor<float>({1}, {inf}), Tensor<float>({1}, {-inf}));
  EXPECT_TRUE(std::isinf(far.value) || far.nan_tainted);
}

TEST(DetectorConfigTest, Validation) {
  EXPECT_NO_THROW(defaults().validate());
  DetectorConfig bad;
  bad.epsilon = 0.2;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = DetectorConfig{};
  bad.epsilon = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(DetectFcTest, FlagsOnlyWhenPredecessorsAgree) {
  ChainValues a;
  ChainValues b;
  b.fc[0] = 1e-7f;  // below epsilon
  b.fc[1] = 0.2f;
  b.fc[2] = 0.2f;   // inherited from node 1, so gated
  auto r = detect_fc(chain_bundle("x", a), chain_bundle("y", b),
                     compare_pair(chain_bundle("x", a), chain_bundle("y", b)), defaults());
  ASSERT_EQ(r.findings.size(), 1u);
  EXPECT_EQ(r.findings[0].node_id, 1);
  EXPECT_EQ(r.findings[0].kind, "Dense");
  EXPECT_EQ(r.findings[0].stage, Stage::kFC);
  ASSERT_EQ(r.findings[0].gate.size(), 1u);
  EXPECT_NEAR(r.findings[0].gate[0].distance, 1e-7, 1e-9);

  // Predecessor already off by 0.01: the error is transmitted, not new.
  ChainValues c;
  c.fc[0] = 0.01f;
  c.fc[1] = 5.0f;
  const TraceBundle ta = chain_bundle("x", a);
  const TraceBundle tc = chain_bundle("y", c);
  EXPECT_TRUE(detect_fc(ta, tc, compare_pair(ta, tc), defaults()).findings.empty());
}

TEST(DetectFcTest, SourceIsVacuouslyGated) {
  ChainValues a;
  ChainValues b;
  b.fc[0] = 0.5f;
  const TraceBundle ta = chain_bundle("x", a);
  const TraceBundle tb = chain_bundle("y", b);
  const auto r = detect_fc(ta, tb, compare_pair(ta, tb), defaults());
  ASSERT_EQ(r.findings.size(), 1u);
  EXPECT_EQ(r.findings[0].node_id, 0);
  EXPECT_TRUE(r.findings[0].gate.empty());
}

TEST(DetectLcTest, GateAndValues) {
  ChainValues a;
  a.lo = 15.942385f;
  ChainValues b = a;
  b.lo = 15.333239f;
  b.fc[2] = 1e-6f;
  TraceBundle ta = chain_bundle("x", a);
  TraceBundle tb = chain_bundle("y", b);
  auto r = detect_lc(ta, tb, compare_pair(ta, tb), defaults());
  ASSERT_EQ(r.findings.size(), 1u);
  EXPECT_EQ(r.findings[0].stage, Stage::kLC);
  EXPECT_EQ(r.findings[0].kind, "mean_squared_error");
  EXPECT_EQ(r.findings[0].node_id, -1);
  EXPECT_NEAR(r.findings[0].lo_diff, 0.609146, 1e-5);

  // Sink outputs already differ: LC is not evaluated.
  b.fc[2] = 0.02f;
  tb = chain_bundle("y", b);
  EXPECT_TRUE(detect_lc(ta, tb, compare_pair(ta, tb), defaults()).findings.empty());

  // Same loss value, different loss gradient.
  ChainValues c = a;
  c.lg = 0.5f;
  const TraceBundle tc = chain_bundle("y", c);
  r = detect_lc(ta, tc, compare_pair(ta, tc), defaults());
  ASSERT_EQ(r.findings.size(), 1u);
  EXPECT_NEAR(r.findings[0].lg_distance, 0.5, 1e-7);

  EXPECT_TRUE(detect_lc(ta, ta, compare_pair(ta, ta), defaults()).findings.empty());
}

TEST(DetectLcTest, OptionalScalingByLossOutputScale) {
  ChainValues a;
  ChainValues b;
  b.lo = 1.0f;  // beyond t = 0.15, within 100 * t
  TraceBundle ta = chain_bundle("x", a);
  TraceBundle tb = chain_bundle("y", b);
  ta.loss = tb.loss = "mean_absolute_percentage_error";
  EXPECT_EQ(detect_lc(ta, tb, compare_pair(ta, tb), defaults()).findings.size(), 1u);
  DetectorConfig scaled;
  scaled.scale_lc_by_loss = true;
  EXPECT_TRUE(detect_lc(ta, tb, compare_pair(ta, tb), scaled).findings.empty());
}

TEST(DetectBcTest, BlameStaysWithTheFirstDivergingNode) {
  // Node 2 (the sink) sends a gradient off by 0.3; node 1's is off by 0.5
  // because of it. Only node 2 is flagged.
  ChainValues a;
  ChainValues b;
  b.bc[2] = 0.3f;
  b.bc[1] = 0.5f;
  b.bc[0] = 0.5f;
  const TraceBundle ta = chain_bundle("x", a);
  const TraceBundle tb = chain_bundle("y", b);
  const auto r = detect_bc(ta, tb, compare_pair(ta, tb), defaults());
  ASSERT_EQ(r.findings.size(), 1u);
  EXPECT_EQ(r.findings[0].node_id, 2);
  EXPECT_EQ(r.findings[0].kind, "ReLU");
  ASSERT_EQ(r.findings[0].gate.size(), 1u);
  EXPECT_EQ(r.findings[0].gate[0].node, -1);  // gated on the loss gradient

  // A divergence that starts at node 1.
  ChainValues c;
  c.bc[1] = 0.5f;
  c.bc[0] = 0.5f;
  const TraceBundle tc = chain_bundle("y", c);
  const auto r2 = detect_bc(ta, tc, compare_pair(ta, tc), defaults());
  ASSERT_EQ(r2.findings.size(), 1u);
  EXPECT_EQ(r2.findings[0].node_id, 1);

  ChainValues tiny;
  tiny.bc[0] = tiny.bc[1] = tiny.bc[2] = 1e-7f;
  const TraceBundle td = chain_bundle("y", tiny);
  EXPECT_TRUE(detect_bc(ta, td, compare_pair(ta, td), defaults()).findings.empty());
}

TEST(DetectBcTest, SkippedUnlessLossesAgree) {
  ChainValues a;
  ChainValues b;
  b.lo = 1e-3f;  // above epsilon
  b.bc[2] = 0.3f;
  const TraceBundle ta = chain_bundle("x", a);
  const TraceBundle tb = chain_bundle("y", b);
  EXPECT_TRUE(detect_bc(ta, tb, compare_pair(ta, tb), defaults()).findings.empty());
}

TEST(DetectPairTest, SymmetricAndIdentity) {
  ChainValues a;
  ChainValues b;
  b.fc[1] = 0.4f;
  b.fc[2] = 0.4f;
  b.bc[2] = 0.3f;
  const TraceBundle ta = chain_bundle("naive", a);
  const TraceBundle tb = chain_bundle("reordered", b);
  const StageResult ab = detect_pair(ta, tb, defaults());
  const StageResult ba = detect_pair(tb, ta, defaults());
  ASSERT_EQ(ab.findings.size(), ba.findings.size());
  for (size_t i = 0; i < ab.findings.size(); ++i) {
    EXPECT_EQ(ab.findings[i].node_id, ba.findings[i].node_id);
    EXPECT_EQ(ab.findings[i].stage, ba.findings[i].stage);
    EXPECT_EQ(ab.findings[i].backend_a, "naive");
    EXPECT_EQ(ba.findings[i].backend_a, "naive");
    EXPECT_EQ(ab.findings[i].distance, ba.findings[i].distance);
  }
  for (double t : {1e-4, 0.15, 10.0}) {
    DetectorConfig cfg;
    cfg.t = t;
    cfg.epsilon = t / 10;
    EXPECT_TRUE(detect_pair(ta, ta, cfg).findings.empty());
  }
}

TEST(DetectPairTest, NanTaintedDistancesBypassThresholds) {
  ChainValues a;
  ChainValues b;
  b.fc[1] = kNan;
  b.fc[2] = kNan;
  TraceBundle ta = chain_bundle("x", a);
  TraceBundle tb = chain_bundle("y", b);
  tb.outcome = Outcome::kNan;
  EXPECT_TRUE(detect_pair(ta, tb, defaults()).findings.empty());
  const NanCrashResult nc = classify_nan_crash({ta, tb});
  ASSERT_EQ(nc.nan_events.size(), 1u);
  EXPECT_EQ(nc.nan_events[0].node_id, 1);
  EXPECT_EQ(nc.nan_events[0].stage, "forward");
  EXPECT_EQ(nc.nan_events[0].affected, std::vector<std::string>{"y"});
  EXPECT_EQ(nc.nan_events[0].healthy, std::vector<std::string>{"x"});
}

TEST(ClassifyNanCrashTest, Rules) {
  // Real traces of a generated model, with one backend's forward pass
  // poisoned from node 7 onward.
  GenerationConfig cfg;
  cfg.n_models = 1;
  const ModelSpec spec = generate_models(cfg).models[0];
  TraceBundle ok = run_backend("naive", spec);
  TraceBundle bad = run_backend("reordered", spec);
  const int node = std::min(7, spec.graph.size() - 1);
  for (int i = 0; i < spec.graph.size(); ++i) {
    // Poison node `node` and everything downstream of it.
    bool downstream = i == node;
    for (int p : bad.nodes[i].preds) {
      downstream = downstream || std::isnan((*bad.fc[p])[0]);
    }
    if (downstream) std::fill(bad.fc[i]->data.begin(), bad.fc[i]->data.end(), kNan);
  }
  bad.outcome = Outcome::kNan;
  NanCrashResult r = classify_nan_crash({ok, bad});
  ASSERT_EQ(r.nan_events.size(), 1u);
  EXPECT_EQ(r.nan_events[0].node_id, node);
  EXPECT_EQ(r.nan_events[0].kind, spec.graph.nodes[node].kind);

  // No healthy backend: dropped.
  TraceBundle bad2 = bad;
  bad2.backend_id = "naive";
  EXPECT_TRUE(classify_nan_crash({bad2, bad}).nan_events.empty());

  // Crashes: one survivor makes an event; all crashing alike drops it.
  TraceBundle crash = ok;
  crash.backend_id = "naive+debug-throw";
  crash.outcome = Outcome::kCrash;
  crash.message = "segfault at 0x7ffd12 in /usr/lib/libx.so line 42";
  r = classify_nan_crash({ok, crash});
  ASSERT_EQ(r.crash_events.size(), 1u);
  EXPECT_EQ(r.crash_events[0].normalized_message, "segfault at <addr> in <path> line <n>");
  EXPECT_EQ(r.crash_events[0].crashed, std::vector<std::string>{"naive+debug-throw"});
  EXPECT_EQ(r.crash_events[0].survived, std::vector<std::string>{"naive"});
  TraceBundle crash2 = crash;
  crash2.backend_id = "naive";
  crash2.message = "segfault at 0xdead in /tmp/other.so line 7";
  EXPECT_TRUE(classify_nan_crash({crash2, crash}).crash_events.empty());
}

TEST(NormalizeCrashMessageTest, StripsVolatileParts) {
  EXPECT_EQ(normalize_crash_message("killed by signal 11 (Segmentation fault)"),
            "killed by signal <n> (Segmentation fault)");
  EXPECT_EQ(normalize_crash_message("  bad alloc of 1.5e+09 bytes  at 0xABCdef\n"),
            "bad alloc of <n> bytes at <addr>");
  EXPECT_EQ(normalize_crash_message("cannot open ./data/x.bin: No such file"),
            "cannot open <path>: No such file");
  EXPECT_EQ(normalize_crash_message("timeout"), "timeout");
  EXPECT_EQ(normalize_crash_message("Conv2D failed"), "Conv2D failed");
}

TEST(VoteTest, Occurrences) {
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::optional<Distance>> d{{{"A", "B"}, Distance{1.0, false}},
                                           {{"A", "C"}, Distance{1.0, false}},
                                           {{"B", "C"}, Distance{0.0, false}}};
  const std::vector<std::string> backends{"A", "B", "C"};
  EXPECT_EQ(vote_occurrence(backends, d, 0.15), "A");
  d[{"B", "C"}] = Distance{1.0, false};
  EXPECT_EQ(vote_occurrence(backends, d, 0.15), "");
  d[{"B", "C"}] = Distance{0.0, true};  // tainted: cannot confirm agreement
  EXPECT_EQ(vote_occurrence(backends, d, 0.15), "");
  EXPECT_EQ(vote_occurrence({"A", "B"}, d, 0.15), "");
}

TEST(DeduplicateTest, Rules) {
  EXPECT_TRUE(deduplicate({}).empty());
  std::vector<Finding> fs;
  for (int i = 0; i < 4; ++i) {
    Finding f;
    f.stage = Stage::kFC;
    f.kind = "Conv2D";
    f.model_id = "m0000" + std::to_string(i);
    f.backend_a = "naive";
    f.backend_b = "reordered";
    f.distance = 0.2 + i * (i == 2 ? 1 : 0.01);
    fs.push_back(f);
  }
  auto d = deduplicate(fs);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].count, 4);
  EXPECT_EQ(d[0].model_id, "m00002");
  EXPECT_EQ(d[0].models.size(), 4u);

  Finding bc = fs[0];
  bc.stage = Stage::kBC;
  fs.push_back(bc);
  EXPECT_EQ(deduplicate(fs).size(), 2u);
  Finding other_pair = fs[0];
  other_pair.backend_b = "z";
  fs.push_back(other_pair);
  EXPECT_EQ(deduplicate(fs).size(), 3u);
}

// Traces of a small trigger-biased corpus over the given backends.
std::vector<std::vector<TraceBundle>> mutant_corpus(const std::vector<std::string>& backends) {
  GenerationConfig cfg;
  cfg.n_models = 30;
  cfg.trigger_bias = true;
  std::vector<std::vector<TraceBundle>> out;
  for (const ModelSpec& m : generate_models(cfg).models) {
    std::vector<TraceBundle> per;
    for (const std::string& b : backends) {
      per.push_back(run_backend(b, m));
    }
    out.push_back(std::move(per));
  }
  return out;
}

InconsistencyReport report_for(const std::vector<std::vector<TraceBundle>>& corpus,
                               const DetectorConfig& cfg, bool reverse = false) {
  ReportBuilder builder(cfg);
  if (reverse) {
    for (auto it = corpus.rbegin(); it != corpus.rend(); ++it) builder.add(analyze_model(*it, cfg));
  } else {
    for (const auto& per : corpus) builder.add(analyze_model(per, cfg));
  }
  return builder.finish();
}

TEST(ReportTest, MutantImplicatedAndOrderIndependent) {
  const std::string mutant = "naive+hinge-no-divide";
  const auto corpus = mutant_corpus({"naive", "reordered", mutant});
  const InconsistencyReport r = report_for(corpus, defaults());
  ASSERT_FALSE(r.findings.empty());
  bool voted = false;
  for (const Vote& v : r.votes) {
    if (v.stage == Stage::kLC && v.kind == "categorical_hinge") {
      voted = true;
      EXPECT_EQ(v.implicated, mutant);
      EXPECT_FALSE(v.ambiguous);
    }
  }
  EXPECT_TRUE(voted);
  for (const Finding& f : r.findings) {
    EXPECT_TRUE(f.backend_a == mutant || f.backend_b == mutant) << f.backend_a << " " << f.backend_b;
  }
  EXPECT_EQ(report_to_json(report_for(corpus, defaults(), true)), report_to_json(r));
  const auto j = nlohmann::json::parse(report_to_json(r));
  for (const char* key : {"findings", "votes", "nan_events", "crash_events", "config", "backends"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_NE(report_to_text(r).find("categorical_hinge"), std::string::npos);
}

TEST(ReportTest, ThresholdMonotonicity) {
  const auto corpus = mutant_corpus({"naive", "reordered", "naive+relu-eq-zero",
                                     "naive+pooling-location", "naive+hinge-no-divide"});
  EXPECT_GT(report_for(corpus, defaults()).raw_findings, 0);
  size_t previous = std::numeric_limits<size_t>::max();
  for (double t : {0.001, 0.01, 0.05, 0.15, 0.3, 0.4}) {
    DetectorConfig cfg;
    cfg.t = t;
    const size_t n = report_for(corpus, cfg).raw_findings;
    EXPECT_LE(n, previous) << "t=" << t;
    previous = n;
  }
  // Larger epsilon never removes findings.
  size_t last = 0;
  for (double eps : {1e-7, 1e-6, 1e-5, 1e-4}) {
    DetectorConfig cfg;
    cfg.epsilon = eps;
    const size_t n = report_for(corpus, cfg).raw_findings;
    EXPECT_GE(n, last) << "epsilon=" << eps;
    last = n;
  }
}

TEST(ReportTest, CrashEventsMergeAcrossModels) {
  std::vector<std::vector<TraceBundle>> corpus;
  for (int m = 0; m < 2; ++m) {
    const std::string id = "m0000" + std::to_string(m);
    TraceBundle ok = chain_bundle("naive", {}, id);
    TraceBundle crash = chain_bundle("stub", {}, id);
    crash.outcome = Outcome::kCrash;
    crash.message = "abort at 0x" + std::to_string(1000 + m);
    corpus.push_back({ok, crash});
  }
  const InconsistencyReport r = report_for(corpus, defaults());
  ASSERT_EQ(r.crash_events.size(), 1u);
  EXPECT_EQ(r.crash_events[0].count, 2);
  EXPECT_EQ(r.crash_events[0].models, (std::vector<std::string>{"m00000", "m00001"}));
  EXPECT_TRUE(r.has_issues());
  EXPECT_TRUE(r.findings.empty());
}

}  // namespace
}  // namespace archfuzz
