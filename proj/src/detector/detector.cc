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

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <tuple>

#include "archfuzz/errors.h"
#include "archfuzz/layer_kind.h"

namespace archfuzz {

void DetectorConfig::validate() const {
  if (!(epsilon > 0) || !(epsilon < t)) {
    throw ConfigError("detector needs 0 < epsilon < t (got epsilon=" +
                      std::to_string(epsilon) + ", t=" + std::to_string(t) + ")");
  }
}

Distance chebyshev(const Tensor<float>& x, const Tensor<float>& y) {
  if (x.dims != y.dims) {
    throw Error("chebyshev: shape mismatch " + dims_to_string(x.dims) + " vs " +
                dims_to_string(y.dims));
  }
  Distance d;
  for (int64_t m = 0; m < x.size(); ++m) {
    const double a = x[m];
    const double b = y[m];
    if (std::isnan(a) || std::isnan(b)) {
      d.nan_tainted = true;
      continue;
    }
    if (a == b) continue;  // also covers equal infinities
    d.value = std::max(d.value, std::abs(a - b));
  }
  return d;
}

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kFC:
      return "FC";
    case Stage::kLC:
      return "LC";
    case Stage::kBC:
      return "BC";
  }
  return "?";
}

std::optional<Distance> PairComparison::bc_node(int node) const {
  if (node < 0 || node >= static_cast<int>(bc.size()) || bc[node].empty()) {
    return std::nullopt;
  }
  Distance out;
  for (const auto& d : bc[node]) {
    if (!d) return std::nullopt;
    out.value = std::max(out.value, d->value);
    out.nan_tainted = out.nan_tainted || d->nan_tainted;
  }
  return out;
}

namespace {

std::optional<Distance> maybe_distance(const std::optional<Tensor<float>>& a,
                                       const std::optional<Tensor<float>>& b) {
  if (!a || !b) return std::nullopt;
  return chebyshev(*a, *b);
}

std::vector<int> topo_order(const std::vector<TraceNode>& nodes) {
  const int n = static_cast<int>(nodes.size());
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> succs(n);
  for (const TraceNode& node : nodes) {
    for (int p : node.preds) {
      if (p < 0 || p >= n) throw Error("trace names unknown predecessor " + std::to_string(p));
      succs[p].push_back(node.id);
      ++indegree[node.id];
    }
  }
  std::vector<int> order;
  std::set<int> ready;
  for (int i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.insert(i);
  }
  while (!ready.empty()) {
    const int id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (int s : succs[id]) {
      if (--indegree[s] == 0) ready.insert(s);
    }
  }
  if (static_cast<int>(order.size()) != n) throw Error("trace graph has a cycle");
  return order;
}

bool both_ok(const TraceBundle& a, const TraceBundle& b, StageResult& out, Stage stage) {
  if (a.outcome == Outcome::kOk && b.outcome == Outcome::kOk) return true;
  out.gaps.push_back({a.model_id, stage, -1,
                      "outcomes " + std::string(outcome_name(a.outcome)) + "/" +
                          std::string(outcome_name(b.outcome)) + " are not both ok"});
  return false;
}

Finding make_finding(Stage stage, const TraceBundle& a, const TraceBundle& b, int node,
                     std::string kind, double distance) {
  Finding f;
  f.stage = stage;
  f.model_id = a.model_id;
  f.node_id = node;
  f.kind = std::move(kind);
  f.backend_a = std::min(a.backend_id, b.backend_id);
  f.backend_b = std::max(a.backend_id, b.backend_id);
  f.distance = distance;
  return f;
}

// Combined LC distance: the larger of the loss-value and loss-gradient gaps.
std::optional<Distance> lc_distance(const PairComparison& pc) {
  if (!pc.lo || !pc.lg) return std::nullopt;
  return Distance{std::max(pc.lo->value, pc.lg->value),
                  pc.lo->nan_tainted || pc.lg->nan_tainted};
}

}  // namespace

PairComparison compare_pair(const TraceBundle& a, const TraceBundle& b) {
  if (a.nodes != b.nodes) {
    throw Error("traces for model '" + a.model_id + "' from '" + a.backend_id + "' and '" +
                b.backend_id + "' describe different graphs");
  }
  PairComparison pc;
  pc.backend_a = a.backend_id;
  pc.backend_b = b.backend_id;
  const size_t n = a.nodes.size();
  pc.fc.resize(n);
  pc.bc.resize(n);
  for (size_t i = 0; i < n; ++i) {
    if (i < a.fc.size() && i < b.fc.size()) pc.fc[i] = maybe_distance(a.fc[i], b.fc[i]);
    const size_t ka = i < a.bc.size() ? a.bc[i].size() : 0;
    const size_t kb = i < b.bc.size() ? b.bc[i].size() : 0;
    const size_t k = std::max(ka, kb);
    pc.bc[i].resize(k);
    for (size_t e = 0; e < std::min(ka, kb); ++e) {
      pc.bc[i][e] = chebyshev(a.bc[i][e], b.bc[i][e]);
    }
  }
  pc.lo = maybe_distance(a.lo, b.lo);
  pc.lg = maybe_distance(a.lg, b.lg);
  return pc;
}

StageResult detect_fc(const TraceBundle& a, const TraceBundle& b, const PairComparison& pc,
                      const DetectorConfig& cfg) {
  StageResult out;
  if (!both_ok(a, b, out, Stage::kFC)) return out;
  for (const TraceNode& node : a.nodes) {
    const auto& d = pc.fc[node.id];
    if (!d) {
      out.gaps.push_back({a.model_id, Stage::kFC, node.id, "missing forward trace"});
      continue;
    }
    if (d->nan_tainted || !(d->value > cfg.t)) continue;
    std::vector<GateDistance> gate;
    bool gated = true;
    bool evaluable = true;
    for (int p : node.preds) {
      const auto& dp = pc.fc[p];
      if (!dp || dp->nan_tainted) {
        evaluable = false;
        break;
      }
      gate.push_back({p, dp->value});
      gated = gated && dp->value < cfg.epsilon;
    }
    if (!evaluable) {
      out.gaps.push_back({a.model_id, Stage::kFC, node.id, "predecessor trace unusable"});
      continue;
    }
    if (!gated) continue;
    Finding f = make_finding(Stage::kFC, a, b, node.id, node.kind, d->value);
    f.gate = std::move(gate);
    out.findings.push_back(std::move(f));
  }
  return out;
}

StageResult detect_lc(const TraceBundle& a, const TraceBundle& b, const PairComparison& pc,
                      const DetectorConfig& cfg) {
  StageResult out;
  if (!both_ok(a, b, out, Stage::kLC)) return out;
  const int sink = a.sink();
  const auto& ds = sink >= 0 ? pc.fc[sink] : std::optional<Distance>();
  if (!ds || !pc.lo || !pc.lg) {
    out.gaps.push_back({a.model_id, Stage::kLC, -1, "missing sink or loss trace"});
    return out;
  }
  if (ds->nan_tainted || !(ds->value < cfg.epsilon)) return out;
  if (pc.lo->nan_tainted || pc.lg->nan_tainted) return out;
  double t = cfg.t;
  if (cfg.scale_lc_by_loss && !a.loss.empty()) t *= loss_kind(a.loss).output_scale;
  if (pc.lo->value > t || pc.lg->value > t) {
    Finding f = make_finding(Stage::kLC, a, b, -1, a.loss,
                             std::max(pc.lo->value, pc.lg->value));
    f.lo_diff = pc.lo->value;
    f.lg_distance = pc.lg->value;
    f.gate.push_back({sink, ds->value});
    out.findings.push_back(std::move(f));
  }
  return out;
}

StageResult detect_bc(const TraceBundle& a, const TraceBundle& b, const PairComparison& pc,
                      const DetectorConfig& cfg) {
  StageResult out;
  if (!both_ok(a, b, out, Stage::kBC)) return out;
  if (!pc.lo || !pc.lg) {
    out.gaps.push_back({a.model_id, Stage::kBC, -1, "missing loss trace"});
    return out;
  }
  // Backward comparison only makes sense once the losses agree.
  if (pc.lo->nan_tainted || !(pc.lo->value < cfg.epsilon)) return out;
  const int sink = a.sink();
  for (const TraceNode& node : a.nodes) {
    const auto d = pc.bc_node(node.id);
    if (!d) {
      out.gaps.push_back({a.model_id, Stage::kBC, node.id, "missing backward trace"});
      continue;
    }
    if (d->nan_tainted || !(d->value > cfg.t)) continue;
    std::vector<GateDistance> gate;
    bool gated = true;
    bool evaluable = true;
    if (node.id == sink) {
      if (pc.lg->nan_tainted) continue;
      gate.push_back({-1, pc.lg->value});
      gated = pc.lg->value < cfg.epsilon;
    }
    for (int s : a.successors(node.id)) {
      // The gradient entry the successor sends back to this node.
      const auto& preds = a.nodes[s].preds;
      for (size_t k = 0; k < preds.size(); ++k) {
        if (preds[k] != node.id) continue;
        const auto& ds = k < pc.bc[s].size() ? pc.bc[s][k] : std::optional<Distance>();
        if (!ds || ds->nan_tainted) {
          evaluable = false;
          continue;
        }
        gate.push_back({s, ds->value});
        gated = gated && ds->value < cfg.epsilon;
      }
    }
    if (!evaluable) {
      out.gaps.push_back({a.model_id, Stage::kBC, node.id, "successor trace unusable"});
      continue;
    }
    if (!gated) continue;
    Finding f = make_finding(Stage::kBC, a, b, node.id, node.kind, d->value);
    f.gate = std::move(gate);
    out.findings.push_back(std::move(f));
  }
  return out;
}

StageResult detect_pair(const TraceBundle& a, const TraceBundle& b,
                        const DetectorConfig& cfg) {
  StageResult out;
  if (!both_ok(a, b, out, Stage::kFC)) return out;
  cfg.validate();
  const PairComparison pc = compare_pair(a, b);
  for (auto* fn : {&detect_fc, &detect_lc, &detect_bc}) {
    StageResult r = fn(a, b, pc, cfg);
    for (auto& f : r.findings) out.findings.push_back(std::move(f));
    for (auto& g : r.gaps) out.gaps.push_back(std::move(g));
  }
  return out;
}

std::string normalize_crash_message(const std::string& message) {
  static const std::regex hex("0[xX][0-9a-fA-F]+");
  static const std::regex path(R"((?:~|\.{1,2})?(?:/[^\s:'"(),]+)+)");
  static const std::regex number(R"(\b\d+(?:\.\d+)?(?:[eE][-+]?\d+)?\b)");
  static const std::regex space(R"(\s+)");
  std::string s = std::regex_replace(message, hex, "<addr>");
  s = std::regex_replace(s, path, "<path>");
  s = std::regex_replace(s, number, "<n>");
  s = std::regex_replace(s, space, " ");
  const size_t first = s.find_first_not_of(' ');
  if (first == std::string::npos) return "";
  return s.substr(first, s.find_last_not_of(' ') - first + 1);
}

namespace {

enum class Health { kNone, kNan, kInf };

Health health_of(const Tensor<float>& t) {
  Health h = Health::kNone;
  for (float v : t.data) {
    if (std::isnan(v)) return Health::kNan;
    if (std::isinf(v)) h = Health::kInf;
  }
  return h;
}

// Looks for a split among `present` (backend index, tensor) entries: first by
// NaN presence, then by any non-finite value. Returns the affected indices.
std::vector<size_t> find_split(
    const std::vector<std::pair<size_t, const Tensor<float>*>>& present) {
  if (present.size() < 2) return {};
  for (bool nan_only : {true, false}) {
    std::vector<size_t> affected;
    for (const auto& [idx, t] : present) {
      const Health h = health_of(*t);
      if (h == Health::kNan || (!nan_only && h == Health::kInf)) affected.push_back(idx);
    }
    if (!affected.empty() && affected.size() < present.size()) return affected;
  }
  return {};
}

}  // namespace

NanCrashResult classify_nan_crash(const std::vector<TraceBundle>& bundles) {
  NanCrashResult out;
  if (bundles.size() < 2) return out;
  const std::string model_id = bundles.front().model_id;

  // Crashes grouped by normalized message.
  std::map<std::string, std::vector<size_t>> crashes;
  for (size_t i = 0; i < bundles.size(); ++i) {
    if (bundles[i].outcome == Outcome::kCrash) {
      crashes[normalize_crash_message(bundles[i].message)].push_back(i);
    }
  }
  for (const auto& [norm, idx] : crashes) {
    if (idx.size() == bundles.size()) continue;  // every backend failed the same way
    CrashEvent e;
    e.normalized_message = norm;
    e.message = bundles[idx.front()].message;
    std::set<size_t> crashed(idx.begin(), idx.end());
    for (size_t i = 0; i < bundles.size(); ++i) {
      (crashed.count(i) ? e.crashed : e.survived).push_back(bundles[i].backend_id);
    }
    std::sort(e.crashed.begin(), e.crashed.end());
    std::sort(e.survived.begin(), e.survived.end());
    e.models = {model_id};
    out.crash_events.push_back(std::move(e));
  }

  // NaN events among the backends that produced a full trace.
  std::vector<size_t> live;
  bool any_nan = false;
  for (size_t i = 0; i < bundles.size(); ++i) {
    if (bundles[i].outcome == Outcome::kCrash) continue;
    live.push_back(i);
    any_nan = any_nan || bundles[i].outcome == Outcome::kNan;
  }
  if (!any_nan || live.size() < 2) return out;
  const TraceBundle& ref = bundles[live.front()];
  for (size_t i : live) {
    if (bundles[i].nodes != ref.nodes) {
      throw Error("traces for model '" + model_id + "' describe different graphs");
    }
  }
  const std::vector<int> order = topo_order(ref.nodes);

  auto record = [&](const std::string& stage, int node, const std::vector<size_t>& hit,
                    const std::vector<std::pair<size_t, const Tensor<float>*>>& present) {
    NanEvent e;
    e.model_id = model_id;
    e.stage = stage;
    e.node_id = node;
    e.kind = node >= 0 ? ref.nodes[node].kind : ref.loss;
    const std::set<size_t> hit_set(hit.begin(), hit.end());
    for (const auto& [idx, t] : present) {
      (hit_set.count(idx) ? e.affected : e.healthy).push_back(bundles[idx].backend_id);
    }
    std::sort(e.affected.begin(), e.affected.end());
    std::sort(e.healthy.begin(), e.healthy.end());
    if (e.healthy.size() == 1 && e.affected.size() > 1) e.implicated = e.healthy.front();
    if (e.affected.size() == 1 && e.healthy.size() > 1) e.implicated = e.affected.front();
    e.models = {model_id};
    out.nan_events.push_back(std::move(e));
  };

  using Present = std::vector<std::pair<size_t, const Tensor<float>*>>;
  for (int id : order) {
    Present present;
    for (size_t i : live) {
      if (id < static_cast<int>(bundles[i].fc.size()) && bundles[i].fc[id]) {
        present.push_back({i, &*bundles[i].fc[id]});
      }
    }
    if (auto hit = find_split(present); !hit.empty()) {
      record("forward", id, hit, present);
      return out;
    }
  }
  for (const char* stage : {"loss", "loss-gradient"}) {
    Present present;
    for (size_t i : live) {
      const auto& t = std::string(stage) == "loss" ? bundles[i].lo : bundles[i].lg;
      if (t) present.push_back({i, &*t});
    }
    if (auto hit = find_split(present); !hit.empty()) {
      record(stage, -1, hit, present);
      return out;
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int id = *it;
    for (size_t k = 0; k < ref.bc[id].size(); ++k) {
      Present present;
      for (size_t i : live) {
        if (k < bundles[i].bc[id].size()) present.push_back({i, &bundles[i].bc[id][k]});
      }
      if (auto hit = find_split(present); !hit.empty()) {
        record("backward", id, hit, present);
        return out;
      }
    }
  }
  // Every live backend produced the same non-finite pattern: nothing to blame.
  return out;
}

std::string vote_occurrence(
    const std::vector<std::string>& backends,
    const std::map<std::pair<std::string, std::string>, std::optional<Distance>>& distances,
    double t) {
  if (backends.size() < 3) return "";
  // +1 disagree, 0 agree, -1 unknown
  auto verdict = [&](const std::string& x, const std::string& y) {
    auto it = distances.find({std::min(x, y), std::max(x, y)});
    if (it == distances.end() || !it->second || it->second->nan_tainted) return -1;
    return it->second->value > t ? 1 : 0;
  };
  std::string implicated;
  for (const std::string& x : backends) {
    bool ok = true;
    for (size_t i = 0; i < backends.size() && ok; ++i) {
      for (size_t j = i + 1; j < backends.size() && ok; ++j) {
        const std::string& y = backends[i];
        const std::string& z = backends[j];
        const int v = verdict(y, z);
        ok = (y == x || z == x) ? v == 1 : v == 0;
      }
    }
    if (ok) {
      if (!implicated.empty()) return "";
      implicated = x;
    }
  }
  return implicated;
}

std::vector<Finding> deduplicate(const std::vector<Finding>& findings) {
  using Key = std::tuple<Stage, std::string, std::string, std::string>;
  std::map<Key, Finding> groups;
  for (const Finding& f : findings) {
    const Key key{f.stage, f.kind, f.backend_a, f.backend_b};
    auto it = groups.find(key);
    const std::vector<std::string> models =
        f.models.empty() ? std::vector<std::string>{f.model_id} : f.models;
    if (it == groups.end()) {
      Finding first = f;
      first.models = models;
      groups.emplace(key, std::move(first));
      continue;
    }
    Finding& g = it->second;
    const int64_t count = g.count + f.count;
    std::vector<std::string> merged = g.models;
    merged.insert(merged.end(), models.begin(), models.end());
    // Ties on distance keep the lexicographically first model for determinism.
    if (f.distance > g.distance ||
        (f.distance == g.distance &&
         std::tie(f.model_id, f.node_id) < std::tie(g.model_id, g.node_id))) {
      g = f;
    }
    g.count = count;
    std::sort(merged.begin(), merged.end());
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    g.models = std::move(merged);
  }
  std::vector<Finding> out;
  for (auto& [key, f] : groups) out.push_back(std::move(f));
  return out;
}

ModelAnalysis analyze_model(const std::vector<TraceBundle>& bundles,
                            const DetectorConfig& cfg) {
  cfg.validate();
  ModelAnalysis m;
  if (bundles.empty()) return m;
  m.model_id = bundles.front().model_id;
  std::vector<const TraceBundle*> sorted;
  for (const TraceBundle& b : bundles) {
    if (b.model_id != m.model_id) {
      throw Error("analyze_model: mixed model ids '" + m.model_id + "' and '" + b.model_id + "'");
    }
    sorted.push_back(&b);
    m.backends.push_back(b.backend_id);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const TraceBundle* x, const TraceBundle* y) { return x->backend_id < y->backend_id; });
  std::sort(m.backends.begin(), m.backends.end());

  std::vector<const TraceBundle*> ok;
  for (const TraceBundle* b : sorted) {
    if (b->outcome == Outcome::kOk) ok.push_back(b);
  }
  const int64_t n = static_cast<int64_t>(sorted.size());
  const int64_t n_ok = static_cast<int64_t>(ok.size());
  m.unevaluable_pairs = n * (n - 1) / 2 - n_ok * (n_ok - 1) / 2;

  std::map<std::pair<std::string, std::string>, PairComparison> pcs;
  std::set<std::pair<Stage, int>> flagged;
  for (size_t i = 0; i < ok.size(); ++i) {
    for (size_t j = i + 1; j < ok.size(); ++j) {
      PairComparison pc = compare_pair(*ok[i], *ok[j]);
      for (auto* fn : {&detect_fc, &detect_lc, &detect_bc}) {
        StageResult r = fn(*ok[i], *ok[j], pc, cfg);
        for (Finding& f : r.findings) {
          flagged.insert({f.stage, f.node_id});
          m.findings.push_back(std::move(f));
        }
        for (DataGap& g : r.gaps) m.gaps.push_back(std::move(g));
      }
      pcs.emplace(std::make_pair(ok[i]->backend_id, ok[j]->backend_id), std::move(pc));
    }
  }

  if (ok.size() >= 3) {
    std::vector<std::string> names;
    for (const TraceBundle* b : ok) names.push_back(b->backend_id);
    for (const auto& [stage, node] : flagged) {
      std::map<std::pair<std::string, std::string>, std::optional<Distance>> dist;
      for (const auto& [pair, pc] : pcs) {
        switch (stage) {
          case Stage::kFC:
            dist[pair] = pc.fc[node];
            break;
          case Stage::kBC:
            dist[pair] = pc.bc_node(node);
            break;
          case Stage::kLC:
            dist[pair] = lc_distance(pc);
            break;
        }
      }
      const std::string kind = stage == Stage::kLC ? ok.front()->loss
                                                   : ok.front()->nodes[node].kind;
      m.occurrence_votes.push_back({std::string(stage_name(stage)) + "|" + kind,
                                    vote_occurrence(names, dist, cfg.t)});
    }
  }

  m.nan_crash = classify_nan_crash(bundles);
  return m;
}

void ReportBuilder::add(const ModelAnalysis& a) {
  ++models_;
  for (const std::string& b : a.backends) {
    if (std::find(backends_.begin(), backends_.end(), b) == backends_.end()) {
      backends_.push_back(b);
    }
  }
  unevaluable_ += a.unevaluable_pairs;
  findings_.insert(findings_.end(), a.findings.begin(), a.findings.end());
  gaps_.insert(gaps_.end(), a.gaps.begin(), a.gaps.end());
  nan_events_.insert(nan_events_.end(), a.nan_crash.nan_events.begin(),
                     a.nan_crash.nan_events.end());
  crash_events_.insert(crash_events_.end(), a.nan_crash.crash_events.begin(),
                       a.nan_crash.crash_events.end());
  votes_.insert(votes_.end(), a.occurrence_votes.begin(), a.occurrence_votes.end());
}

namespace {

template <typename T>
void merge_sorted(std::vector<T>& into, const std::vector<T>& from) {
  into.insert(into.end(), from.begin(), from.end());
  std::sort(into.begin(), into.end());
  into.erase(std::unique(into.begin(), into.end()), into.end());
}

}  // namespace

InconsistencyReport ReportBuilder::finish() const {
  InconsistencyReport r;
  r.config = cfg_;
  r.backends = backends_;
  std::sort(r.backends.begin(), r.backends.end());
  r.models = models_;
  r.unevaluable_pairs = unevaluable_;
  r.raw_findings = static_cast<int64_t>(findings_.size());
  r.findings = deduplicate(findings_);
  r.gaps = gaps_;
  std::sort(r.gaps.begin(), r.gaps.end(), [](const DataGap& x, const DataGap& y) {
    return std::tie(x.model_id, x.stage, x.node_id, x.reason) <
           std::tie(y.model_id, y.stage, y.node_id, y.reason);
  });

  // Votes: a backend is implicated when it wins a strict majority of the
  // occurrences recorded for that (stage, kind).
  std::map<std::string, Vote> votes;
  for (const auto& [key, implicated] : votes_) {
    Vote& v = votes[key];
    const size_t bar = key.find('|');
    const std::string stage = key.substr(0, bar);
    v.stage = stage == "FC" ? Stage::kFC : stage == "LC" ? Stage::kLC : Stage::kBC;
    v.kind = key.substr(bar + 1);
    ++v.occurrences;
    ++v.tally[implicated.empty() ? "<ambiguous>" : implicated];
  }
  for (auto& [key, v] : votes) {
    for (const auto& [backend, n] : v.tally) {
      if (backend != "<ambiguous>" && 2 * n > v.occurrences) {
        v.implicated = backend;
        v.ambiguous = false;
      }
    }
    r.votes.push_back(v);
  }

  std::map<std::tuple<std::string, std::string, std::vector<std::string>,
                      std::vector<std::string>>,
           NanEvent>
      nan_groups;
  for (const NanEvent& e : nan_events_) {
    auto key = std::make_tuple(e.stage, e.kind, e.affected, e.healthy);
    auto it = nan_groups.find(key);
    if (it == nan_groups.end()) {
      nan_groups.emplace(key, e);
      continue;
    }
    NanEvent& g = it->second;
    const int64_t count = g.count + e.count;
    std::vector<std::string> models = g.models;
    if (std::tie(e.model_id, e.node_id) < std::tie(g.model_id, g.node_id)) g = e;
    merge_sorted(models, e.models);
    g.models = std::move(models);
    g.count = count;
  }
  for (auto& [key, e] : nan_groups) r.nan_events.push_back(std::move(e));

  std::map<std::string, CrashEvent> crash_groups;
  for (const CrashEvent& e : crash_events_) {
    auto it = crash_groups.find(e.normalized_message);
    if (it == crash_groups.end()) {
      crash_groups.emplace(e.normalized_message, e);
      continue;
    }
    CrashEvent& g = it->second;
    g.count += e.count;
    if (e.models.front() < g.models.front()) g.message = e.message;
    merge_sorted(g.models, e.models);
    merge_sorted(g.crashed, e.crashed);
    merge_sorted(g.survived, e.survived);
  }
  for (auto& [key, e] : crash_groups) r.crash_events.push_back(std::move(e));
  return r;
}

}  // namespace archfuzz
