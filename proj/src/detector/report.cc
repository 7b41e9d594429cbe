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

// JSON and plain-text renderings of an InconsistencyReport.
#include <cmath>
#include <cstdio>
#include <sstream>

#include "archfuzz/detector.h"
#include "json.hpp"

namespace archfuzz {

using nlohmann::json;

namespace {

// JSON has no NaN or infinity; those distances are stored as strings.
json number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const std::string& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

}  // namespace

std::string report_to_json(const InconsistencyReport& r) {
  json findings = json::array();
  for (const Finding& f : r.findings) {
    json gate = json::array();
    for (const GateDistance& g : f.gate) {
      gate.push_back({{"node_id", g.node}, {"distance", number(g.distance)}});
    }
    json j{{"stage", stage_name(f.stage)},
           {"kind", f.kind},
           {"model_id", f.model_id},
           {"node_id", f.node_id},
           {"backend_a", f.backend_a},
           {"backend_b", f.backend_b},
           {"distance", number(f.distance)},
           {"gate", gate},
           {"count", f.count},
           {"models", f.models}};
    if (f.stage == Stage::kLC) {
      j["lo_diff"] = number(f.lo_diff);
      j["lg_distance"] = number(f.lg_distance);
    }
    findings.push_back(j);
  }
  json votes = json::array();
  for (const Vote& v : r.votes) {
    votes.push_back({{"stage", stage_name(v.stage)},
                     {"kind", v.kind},
                     {"implicated", v.ambiguous ? json(nullptr) : json(v.implicated)},
                     {"ambiguous", v.ambiguous},
                     {"occurrences", v.occurrences},
                     {"tally", v.tally}});
  }
  json nans = json::array();
  for (const NanEvent& e : r.nan_events) {
    nans.push_back({{"stage", e.stage},
                    {"kind", e.kind},
                    {"model_id", e.model_id},
                    {"node_id", e.node_id},
                    {"affected", e.affected},
                    {"healthy", e.healthy},
                    {"implicated", e.implicated.empty() ? json(nullptr) : json(e.implicated)},
                    {"count", e.count},
                    {"models", e.models}});
  }
  json crashes = json::array();
  for (const CrashEvent& e : r.crash_events) {
    crashes.push_back({{"normalized_message", e.normalized_message},
                       {"message", e.message},
                       {"crashed", e.crashed},
                       {"survived", e.survived},
                       {"count", e.count},
                       {"models", e.models}});
  }
  json gaps = json::array();
  for (const DataGap& g : r.gaps) {
    gaps.push_back({{"model_id", g.model_id},
                    {"stage", stage_name(g.stage)},
                    {"node_id", g.node_id},
                    {"reason", g.reason}});
  }
  json out{{"config",
            {{"t", r.config.t},
             {"epsilon", r.config.epsilon},
             {"scale_lc_by_loss", r.config.scale_lc_by_loss}}},
           {"backends", r.backends},
           {"models", r.models},
           {"raw_findings", r.raw_findings},
           {"unevaluable_pairs", r.unevaluable_pairs},
           {"findings", findings},
           {"votes", votes},
           {"nan_events", nans},
           {"crash_events", crashes},
           {"data_gaps", gaps}};
  return out.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

std::string report_to_text(const InconsistencyReport& r) {
  std::ostringstream os;
  os << "models: " << r.models << "  backends: " << join(r.backends) << "  t=" << fmt(r.config.t)
     << "  epsilon=" << fmt(r.config.epsilon) << "\n";
  os << "findings: " << r.findings.size() << " (raw " << r.raw_findings
     << ")  nan events: " << r.nan_events.size() << "  crash events: " << r.crash_events.size()
     << "  unevaluable pairs: " << r.unevaluable_pairs << "\n";
  if (!r.findings.empty()) {
    os << "\nstage  kind                          pair                                      "
          "distance    count  exemplar\n";
    for (const Finding& f : r.findings) {
      char line[512];
      std::snprintf(line, sizeof line, "%-5s  %-28s  %-40s  %-10s  %5lld  %s node %d\n",
                    std::string(stage_name(f.stage)).c_str(), f.kind.c_str(),
                    (f.backend_a + " / " + f.backend_b).c_str(), fmt(f.distance).c_str(),
                    static_cast<long long>(f.count), f.model_id.c_str(), f.node_id);
      os << line;
    }
  }
  if (!r.votes.empty()) {
    os << "\nvotes:\n";
    for (const Vote& v : r.votes) {
      os << "  " << stage_name(v.stage) << " " << v.kind << ": "
         << (v.ambiguous ? std::string("ambiguous") : v.implicated) << " (" << v.occurrences
         << " occurrence" << (v.occurrences == 1 ? "" : "s") << ")\n";
    }
  }
  if (!r.nan_events.empty()) {
    os << "\nnan events:\n";
    for (const NanEvent& e : r.nan_events) {
      os << "  " << e.stage << " " << e.kind << " (" << e.model_id << " node " << e.node_id
         << "): affected " << join(e.affected) << "; healthy " << join(e.healthy);
      if (!e.implicated.empty()) os << "; implicated " << e.implicated;
      os << "; count " << e.count << "\n";
    }
  }
  if (!r.crash_events.empty()) {
    os << "\ncrash events:\n";
    for (const CrashEvent& e : r.crash_events) {
      os << "  [" << join(e.crashed) << "] " << e.normalized_message << " (count " << e.count
         << ")\n";
    }
  }
  return os.str();
}

}  // namespace archfuzz
