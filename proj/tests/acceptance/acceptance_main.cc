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

// Acceptance suite. Each criterion prints one line:
//   PASS|FAIL <criterion>: <measured values> (<pinned bound>)
// and the process exits non-zero if any line failed.

#include <algorithm>
#include <cfloat>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "archfuzz/campaign.h"
#include "archfuzz/detector.h"
#include "archfuzz/engine.h"
#include "archfuzz/errors.h"
#include "archfuzz/generator.h"
#include "archfuzz/graph.h"
#include "archfuzz/layer_kind.h"
#include "archfuzz/rng.h"
#include "archfuzz/trace.h"
#include "archfuzz/usage_stats.h"

namespace archfuzz {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Pinned bounds.
constexpr int kDagGraphs = 10000;
constexpr double kDagSeconds = 60;
constexpr int kChiDraws = 70000;
constexpr double kChiSquare99Df2 = 9.210340371976184;  // -2 ln(0.01)
constexpr int kCoverageModels = 300;
constexpr double kCoverageMinPercent = 95.0;
constexpr double kCoverageSeconds = 600;
constexpr int kGradientModels = 100;
constexpr double kGradientMaxRelError = 1e-3;
constexpr int kFaultModels = 50;
constexpr double kPoolingMinDistance = 1.0;
constexpr double kBceHonest = 15.942385;
constexpr double kBceFaulty = 15.333239;
constexpr double kBceTolerance = 1e-3;
constexpr int kRoundTripBundles = 1000;
constexpr int kCrashModels = 10;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[1024];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void report(const std::string& name, const std::function<Verdict()>& check) {
  Verdict o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++g_failures;
  std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("archfuzz_acceptance_" + name);
  fs::remove_all(dir);
  return dir;
}

// Kahn's algorithm written out here so acyclicity is not judged by the code
// under test alone.
bool independent_dag_check(const ModelGraph& g) {
  const int n = g.size();
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> succ(n);
  std::set<std::pair<int, int>> seen;
  for (const Edge& e : g.edges) {
    if (e.src < 0 || e.dst < 0 || e.src >= n || e.dst >= n || e.src == e.dst) return false;
    if (!seen.insert({e.src, e.dst}).second) return false;
    succ[e.src].push_back(e.dst);
    ++indeg[e.dst];
  }
  int sources = 0;
  int sinks = 0;
  std::vector<int> ready;
  for (int i = 0; i < n; ++i) {
    if (indeg[i] == 0) {
      ++sources;
      ready.push_back(i);
    }
    if (succ[i].empty()) ++sinks;
  }
  if (sources != 1 || sinks != 1) return false;
  int visited = 0;
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    ++visited;
    for (int s : succ[v]) {
      if (--indeg[s] == 0) ready.push_back(s);
    }
  }
  return visited == n;
}

Verdict dag_validity() {
  GenerationConfig cfg;
  cfg.max_vertices = 30;
  cfg.max_cells = 5;
  Rng rng(20260101);
  LayerUsageStats stats;
  int chains = 0;
  int cells = 0;
  int invalid = 0;
  int typed_graphs = 0;
  int retries = 0;
  const auto t0 = Clock::now();
  for (int i = 0; i < kDagGraphs; ++i) {
    const bool chain = rng.bernoulli(cfg.p_chain);
    const ModelGraph skeleton =
        chain ? generate_chain_dag(static_cast<int>(rng.uniform_int(1, cfg.max_vertices)),
                                   cfg.p_skip, rng)
              : generate_cell_dag(static_cast<int>(rng.uniform_int(1, cfg.max_cells)), rng);
    (chain ? chains : cells) += 1;
    bool ok = validate_graph(skeleton).ok() && independent_dag_check(skeleton);
    // The typed graph is checked too, unless layer assignment asked for a
    // fresh skeleton (over budget), which the generator handles by retrying.
    try {
      const AssignedModel typed = assign_layers(skeleton, cfg, stats, rng);
      ok = ok && validate_graph(typed.graph).ok() && independent_dag_check(typed.graph);
      ++typed_graphs;
    } catch (const GenerationRetry&) {
      ++retries;
    }
    invalid += !ok;
  }
  const double secs = seconds_since(t0);
  return {invalid == 0 && chains > 0 && cells > 0 && secs < kDagSeconds,
          fmt("%d graphs (%d chain, %d cell), %d also layer-typed (%d budget retries), %d "
              "invalid, %.1f s (bound: 0 invalid, < %.0f s)",
              kDagGraphs, chains, cells, typed_graphs, retries, invalid, secs, kDagSeconds)};
}

double chi_square(const std::vector<int64_t>& observed, const std::vector<double>& p) {
  int64_t n = 0;
  for (int64_t o : observed) n += o;
  double stat = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double expected = p[i] * static_cast<double>(n);
    stat += (observed[i] - expected) * (observed[i] - expected) / expected;
  }
  return stat;
}

Verdict selection_probabilities() {
  // Three multi-input kinds stay selectable once these are excluded.
  std::vector<std::string> excluded = default_excluded_kinds();
  for (const char* k : {"Maximum", "Minimum", "Concatenate"}) excluded.push_back(k);
  const auto kinds = selectable_kinds(Arity::kMulti, excluded);
  if (kinds.size() != 3) return {false, fmt("expected 3 selectable kinds, got %zu", kinds.size())};
  LayerUsageStats stats;
  const uint64_t frozen[] = {0, 1, 3};
  for (int j = 0; j < 3; ++j) stats.set_count(kinds[j]->name, frozen[j]);
  Rng rng(31337);
  std::vector<int64_t> observed(3, 0);
  for (int i = 0; i < kChiDraws; ++i) {
    const LayerKind& k = peek_layer(Arity::kMulti, stats, rng, excluded);
    for (int j = 0; j < 3; ++j) observed[j] += k.name == kinds[j]->name;
  }
  const double stat = chi_square(observed, {4.0 / 7, 2.0 / 7, 1.0 / 7});
  return {stat < kChiSquare99Df2,
          fmt("counts [0,1,3] -> observed [%lld,%lld,%lld] of %d, chi2=%.3f (bound: < %.3f)",
              static_cast<long long>(observed[0]), static_cast<long long>(observed[1]),
              static_cast<long long>(observed[2]), kChiDraws, stat, kChiSquare99Df2)};
}

CampaignConfig campaign(const std::string& name, int n_models) {
  CampaignConfig cfg;
  cfg.generation.n_models = n_models;
  cfg.workdir = scratch(name);
  cfg.parallelism = 1;
  cfg.timeout_s = 60;
  return cfg;
}

struct DefaultCampaign {
  CampaignSummary summary;
  double seconds = 0;
};

const DefaultCampaign& default_campaign() {
  static const DefaultCampaign run = [] {
    const auto t0 = Clock::now();
    DefaultCampaign r;
    r.summary = run_campaign(campaign("default", kCoverageModels));
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Verdict functionality_coverage() {
  const DefaultCampaign& run = default_campaign();
  const CoverageReport& c = run.summary.coverage;
  std::string missing;
  for (const std::string& k : c.registered_kinds) {
    if (std::find(c.used_kinds.begin(), c.used_kinds.end(), k) == c.used_kinds.end()) {
      missing += (missing.empty() ? "" : ",") + k;
    }
  }
  const bool pass = c.functionality_coverage >= kCoverageMinPercent &&
                    c.loss_coverage == 100.0 && run.seconds < kCoverageSeconds;
  return {pass, fmt("%zu/%zu layer kinds = %.3f%%, %zu/%zu losses = %.1f%%, %.1f s, unused [%s] "
                    "(bound: >= %.0f%%, 100%%, < %.0f s)",
                    c.used_kinds.size(), c.registered_kinds.size(), c.functionality_coverage,
                    c.used_losses.size(), c.registered_losses.size(), c.loss_coverage,
                    run.seconds, missing.c_str(), kCoverageMinPercent, kCoverageSeconds)};
}

Verdict gradient_oracle() {
  GenerationConfig cfg;
  cfg.n_models = kGradientModels;
  cfg.seed = 4242;
  const GenerationResult gen = generate_models(cfg);
  double worst = 0;
  std::string worst_where;
  int evaluable = 0;
  int nan_runs = 0;
  int other_unevaluable = 0;
  int64_t checked = 0;
  int64_t excluded = 0;
  for (const ModelSpec& spec : gen.models) {
    for (const char* backend : {"naive", "reordered"}) {
      GradientCheckOptions opt;
      opt.backend = backend;
      const GradientCheckReport r = check_gradients(spec, opt);
      if (!r.evaluable) {
        // Only an honest NaN run (f32 overflow in the model itself) may be
        // skipped; anything else is a failure of the oracle run.
        const bool nan = run_backend(backend, spec).outcome == archfuzz::Outcome::kNan;
        (nan ? nan_runs : other_unevaluable) += 1;
        continue;
      }
      ++evaluable;
      checked += r.checked;
      excluded += r.excluded;
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        worst_where = spec.model_id + "/" + backend;
      }
    }
  }
  const bool pass = worst < kGradientMaxRelError && other_unevaluable == 0 && evaluable > 0;
  return {pass, fmt("%d models x 2 honest backends: %d runs evaluated, %d skipped as NaN runs, "
                    "%d other; %lld elements checked, %lld excluded at kinks; max rel error "
                    "%.3g at %s (bound: < %.0e)",
                    kGradientModels, evaluable, nan_runs, other_unevaluable,
                    static_cast<long long>(checked), static_cast<long long>(excluded), worst,
                    worst_where.empty() ? "-" : worst_where.c_str(), kGradientMaxRelError)};
}

Verdict clean_run() {
  const DefaultCampaign& run = default_campaign();
  const InconsistencyReport& r = run.summary.report;
  std::map<std::string, int64_t> by_stage{{"FC", 0}, {"LC", 0}, {"BC", 0}};
  std::string first;
  for (const Finding& f : r.findings) {
    by_stage[std::string(stage_name(f.stage))] += f.count;
    if (first.empty()) {
      first = fmt(" first: %s %s node %d %s d=%.3g", std::string(stage_name(f.stage)).c_str(),
                  f.model_id.c_str(), f.node_id, f.kind.c_str(), f.distance);
    }
  }
  const bool pass = r.findings.empty() && r.crash_events.empty();
  return {pass, fmt("naive vs reordered, %lld models, t=%.2f eps=%.0e: FC=%lld LC=%lld BC=%lld, "
                    "crash events %zu%s (bound: 0 findings)",
                    static_cast<long long>(r.models), r.config.t, r.config.epsilon,
                    static_cast<long long>(by_stage["FC"]), static_cast<long long>(by_stage["LC"]),
                    static_cast<long long>(by_stage["BC"]), r.crash_events.size(), first.c_str())};
}

struct FaultCase {
  std::string fault;
  Stage stage;
  std::vector<std::string> kinds;  // any of these counts as the faulted kind
  bool nan_event = false;
};

std::map<std::string, fs::path> g_fault_workdirs;

Verdict seeded_fault(const FaultCase& fc) {
  CampaignConfig cfg = campaign("fault_" + fc.fault, kFaultModels);
  cfg.generation.trigger_bias = true;
  if (fc.nan_event) cfg.generation.nan_inputs = 1;
  const std::string mutant = "naive+" + fc.fault;
  cfg.backends = {"naive", "reordered", mutant};
  const CampaignSummary s = run_campaign(cfg);
  g_fault_workdirs[fc.fault] = cfg.workdir;
  const InconsistencyReport& r = s.report;
  auto faulted = [&](const std::string& kind) {
    return std::find(fc.kinds.begin(), fc.kinds.end(), kind) != fc.kinds.end();
  };

  if (fc.nan_event) {
    int64_t events = 0;
    int64_t implicated = 0;
    for (const NanEvent& e : r.nan_events) {
      if (!faulted(e.kind)) continue;
      events += e.count;
      if (e.implicated == mutant) implicated += e.count;
    }
    return {implicated > 0, fmt("%lld NaN events on global max pooling, %lld implicate %s",
                                static_cast<long long>(events),
                                static_cast<long long>(implicated), mutant.c_str())};
  }

  int64_t hits = 0;
  double max_distance = 0;
  for (const Finding& f : r.findings) {
    const bool involves = f.backend_a == mutant || f.backend_b == mutant;
    if (f.stage != fc.stage || !faulted(f.kind) || !involves) continue;
    hits += f.count;
    max_distance = std::max(max_distance, f.distance);
  }
  int64_t honest_pair = 0;
  for (const Finding& f : r.findings) {
    if (f.backend_a != mutant && f.backend_b != mutant) honest_pair += f.count;
  }
  std::string vote = "none";
  bool voted = false;
  for (const Vote& v : r.votes) {
    if (v.stage != fc.stage || !faulted(v.kind)) continue;
    vote = v.ambiguous ? "ambiguous" : v.implicated;
    voted = !v.ambiguous && v.implicated == mutant;
  }
  bool pass = hits > 0 && voted;
  std::string extra;
  if (fc.fault == "pooling-location") {
    pass = pass && max_distance > kPoolingMinDistance;
    extra = fmt(", max distance %.4g (bound: > %.0f)", max_distance, kPoolingMinDistance);
  } else if (fc.fault == "bce-epsilon-clip") {
    // Independent double-precision oracle for the single-element losses.
    const double oracle_honest = -std::log(static_cast<double>(FLT_EPSILON));
    const double oracle_faulty = -std::log(static_cast<double>(FLT_EPSILON) + 1e-7);
    const float honest = binary_crossentropy_element(0.0f, 1.0f, false);
    const float faulty = binary_crossentropy_element(0.0f, 1.0f, true);
    const double diff = static_cast<double>(honest) - faulty;
    const bool values = std::abs(honest - kBceHonest) < kBceTolerance &&
                        std::abs(faulty - kBceFaulty) < kBceTolerance &&
                        std::abs(diff - (kBceHonest - kBceFaulty)) < kBceTolerance &&
                        std::abs(honest - oracle_honest) < kBceTolerance &&
                        std::abs(faulty - oracle_faulty) < kBceTolerance;
    pass = pass && values;
    extra = fmt(", first element %.6f vs %.6f, diff %.6f (bound: %.6f vs %.6f within %.0e)",
                honest, faulty, diff, kBceHonest, kBceFaulty, kBceTolerance);
  }
  return {pass, fmt("%s -> %lld %s findings on the faulted kind involving the mutant, vote "
                    "implicates %s, honest-pair findings %lld%s",
                    fc.fault.c_str(), static_cast<long long>(hits),
                    std::string(stage_name(fc.stage)).c_str(), vote.c_str(),
                    static_cast<long long>(honest_pair), extra.c_str())};
}

Verdict threshold_monotonicity() {
  const double sweep[] = {0.001, 0.01, 0.05, 0.15, 0.3, 0.4};
  if (g_fault_workdirs.empty()) return {false, "no fault campaign traces available"};
  std::vector<int64_t> raw;
  std::vector<int64_t> dedup;
  for (double t : sweep) {
    DetectorConfig d;
    d.t = t;
    int64_t r = 0;
    int64_t u = 0;
    for (const auto& [fault, dir] : g_fault_workdirs) {
      const InconsistencyReport rep = report_from_workdir(dir, d);
      r += rep.raw_findings;
      u += static_cast<int64_t>(rep.findings.size());
    }
    raw.push_back(r);
    dedup.push_back(u);
  }
  bool pass = raw.front() > 0;
  std::string line;
  for (size_t i = 0; i < raw.size(); ++i) {
    if (i > 0) pass = pass && raw[i] <= raw[i - 1] && dedup[i] <= dedup[i - 1];
    line += fmt("%st=%g:%lld/%lld", i ? " " : "", sweep[i], static_cast<long long>(raw[i]),
                static_cast<long long>(dedup[i]));
  }
  return {pass, fmt("raw/deduplicated findings over %zu fault campaigns: %s (bound: "
                    "non-increasing, non-zero at t=0.001)",
                    g_fault_workdirs.size(), line.c_str())};
}

float from_bits(uint32_t bits) {
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

Tensor<float> random_tensor(Rng& rng) {
  const int rank = static_cast<int>(rng.uniform_int(0, 4));
  std::vector<int64_t> dims;
  for (int i = 0; i < rank; ++i) dims.push_back(rng.uniform_int(0, 5));
  Tensor<float> t(dims);
  for (float& v : t.data) {
    switch (rng.uniform_int(0, 5)) {
      case 0:
        v = -std::numeric_limits<float>::infinity();
        break;
      case 1:
        v = from_bits(0x7f800001u | static_cast<uint32_t>(rng.next() & 0x807fffffu));  // NaN
        break;
      case 2:
        v = -0.0f;
        break;
      default:
        v = from_bits(static_cast<uint32_t>(rng.next()));
    }
  }
  return t;
}

bool same_bits(const std::optional<Tensor<float>>& a, const std::optional<Tensor<float>>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return a->dims == b->dims && a->data.size() == b->data.size() &&
         std::memcmp(a->data.data(), b->data.data(), 4 * a->data.size()) == 0;
}

bool same_bundle(const TraceBundle& a, const TraceBundle& b) {
  if (a.backend_id != b.backend_id || a.model_id != b.model_id || a.loss != b.loss ||
      a.precision != b.precision || a.outcome != b.outcome || a.message != b.message ||
      a.nodes != b.nodes || a.fc.size() != b.fc.size() || a.bc.size() != b.bc.size() ||
      !same_bits(a.lo, b.lo) || !same_bits(a.lg, b.lg)) {
    return false;
  }
  for (size_t i = 0; i < a.fc.size(); ++i) {
    if (!same_bits(a.fc[i], b.fc[i]) || a.bc[i].size() != b.bc[i].size()) return false;
    for (size_t g = 0; g < a.bc[i].size(); ++g) {
      if (!same_bits(a.bc[i][g], b.bc[i][g])) return false;
    }
  }
  return true;
}

Verdict trace_round_trip() {
  Rng rng(1000);
  const fs::path dir = scratch("roundtrip");
  fs::create_directories(dir);
  int failures = 0;
  int64_t nan_values = 0;
  int64_t neg_inf_values = 0;
  for (int k = 0; k < kRoundTripBundles; ++k) {
    TraceBundle b;
    b.backend_id = rng.bernoulli(0.5) ? "reordered" : "naive+relu-eq-zero";
    b.model_id = model_id_for(k);
    b.loss = "mean_squared_error";
    b.outcome = static_cast<archfuzz::Outcome>(rng.uniform_int(0, 2));
    if (rng.bernoulli(0.2)) b.message = "abort at 0xdeadbeef\n\"quoted\"";
    const int n = static_cast<int>(rng.uniform_int(1, 8));
    b.fc.resize(n);
    b.bc.resize(n);
    for (int i = 0; i < n; ++i) {
      TraceNode node{i, i == 0 ? "Input" : "Dense", {}};
      if (i > 0) node.preds.push_back(i - 1);
      b.nodes.push_back(node);
      if (rng.bernoulli(0.9)) b.fc[i] = random_tensor(rng);
      if (rng.bernoulli(0.8)) b.bc[i].push_back(random_tensor(rng));
    }
    if (rng.bernoulli(0.9)) b.lo = random_tensor(rng);
    if (rng.bernoulli(0.9)) b.lg = random_tensor(rng);
    auto tally = [&](const std::optional<Tensor<float>>& t) {
      if (!t) return;
      for (float v : t->data) {
        nan_values += std::isnan(v);
        neg_inf_values += std::isinf(v) && v < 0;
      }
    };
    for (const auto& t : b.fc) tally(t);
    tally(b.lo);
    tally(b.lg);

    const fs::path path = dir / (b.model_id + ".trace");
    write_trace(b, path);
    const TraceBundle back = read_trace(path);
    const std::string bytes = encode_trace(b);
    const bool ok = same_bundle(b, back) && encode_trace(back) == bytes &&
                    same_bundle(decode_trace(bytes), b);
    failures += !ok;
  }
  return {failures == 0 && nan_values > 0 && neg_inf_values > 0,
          fmt("%d bundles written and read back, %d mismatches; payloads held %lld NaN and %lld "
              "-inf values (bound: 0 mismatches)",
              kRoundTripBundles, failures, static_cast<long long>(nan_values),
              static_cast<long long>(neg_inf_values))};
}

bool complete(const TraceBundle& t) {
  if (t.outcome == archfuzz::Outcome::kCrash || t.nodes.empty()) return false;
  if (t.outcome == archfuzz::Outcome::kNan) return true;  // stops at the first NaN by design
  if (!t.lo || !t.lg || t.fc.size() != t.nodes.size() || t.bc.size() != t.nodes.size()) {
    return false;
  }
  for (size_t i = 0; i < t.nodes.size(); ++i) {
    const size_t grads = t.nodes[i].preds.empty() ? 1 : t.nodes[i].preds.size();
    if (!t.fc[i] || t.bc[i].size() != grads) return false;
  }
  return true;
}

Verdict crash_isolation() {
  CampaignConfig cfg = campaign("crash", kCrashModels);
  cfg.backends = {"naive", "reordered", "naive+debug-abort"};
  const CampaignSummary s = run_campaign(cfg);
  int64_t events = 0;
  bool messages_ok = !s.report.crash_events.empty();
  std::string sample;
  for (const CrashEvent& e : s.report.crash_events) {
    events += e.count;
    if (sample.empty()) sample = e.normalized_message;
    messages_ok = messages_ok && e.normalized_message == normalize_crash_message(e.message) &&
                  e.normalized_message.find("0x") == std::string::npos &&
                  e.normalized_message.find("<addr>") != std::string::npos &&
                  e.crashed == std::vector<std::string>{"naive+debug-abort"};
  }
  int incomplete = 0;
  for (int i = 0; i < kCrashModels; ++i) {
    for (const char* b : {"naive", "reordered"}) {
      incomplete += !complete(read_trace(trace_path(cfg.workdir, model_id_for(i), b)));
    }
  }
  const bool pass = messages_ok && s.crashed_jobs == kCrashModels && events == kCrashModels &&
                    incomplete == 0 && fs::exists(cfg.workdir / "report.json");
  return {pass, fmt("campaign finished, %lld/%d aborting jobs recorded as %lld crash events, "
                    "%d incomplete honest traces; normalized: \"%s\"",
                    static_cast<long long>(s.crashed_jobs), kCrashModels,
                    static_cast<long long>(events), incomplete, sample.c_str())};
}

}  // namespace
}  // namespace archfuzz

int main() {
  using namespace archfuzz;
  report("dag-validity", dag_validity);
  report("selection-probability-chi2", selection_probabilities);
  report("functionality-coverage", functionality_coverage);
  report("gradient-oracle", gradient_oracle);
  report("clean-run-soundness", clean_run);
  const std::vector<FaultCase> faults = {
      {"relu-eq-zero", Stage::kBC, {"ReLU"}},
      {"pooling-location", Stage::kFC, {"AveragePooling2D"}},
      {"bce-epsilon-clip", Stage::kLC, {"binary_crossentropy"}},
      {"maxpool-tie-gradient", Stage::kBC, {"MaxPooling1D"}},
      {"hinge-no-divide", Stage::kLC, {"categorical_hinge"}},
      {"globalmaxpool-neginf-on-nan", Stage::kFC,
       {"GlobalMaxPooling1D", "GlobalMaxPooling2D", "GlobalMaxPooling3D"}, true},
  };
  for (const FaultCase& f : faults) {
    report("seeded-fault " + f.fault, [&] { return seeded_fault(f); });
  }
  report("threshold-monotonicity", threshold_monotonicity);
  report("trace-round-trip", trace_round_trip);
  report("crash-isolation", crash_isolation);
  std::printf("%s: %d failing criteria\n", g_failures ? "FAILED" : "ALL PASSED", g_failures);
  return g_failures ? 1 : 0;
}
