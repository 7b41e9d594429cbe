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

#ifndef ARCHFUZZ_CAMPAIGN_H_
#define ARCHFUZZ_CAMPAIGN_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "archfuzz/detector.h"
#include "archfuzz/generator.h"
#include "archfuzz/model_spec.h"
#include "archfuzz/trace.h"

namespace archfuzz {

// Environment variable that overrides the configured working directory.
inline constexpr char kWorkdirEnv[] = "ARCHFUZZ_WORKDIR";

enum class Isolation {
  kProcess,  // one forked child per (model, backend) job
  kNone,     // in-process; a crash takes the campaign down with it
};

struct CampaignConfig {
  GenerationConfig generation;
  DetectorConfig detector;
  std::vector<std::string> backends{"naive", "reordered"};
  // Backends run through an external command, keyed by backend name. The
  // command is invoked as `<command> --model <dir> --backend <name>
  // --trace-out <file>`.
  std::map<std::string, std::string> external;
  std::filesystem::path workdir = "archfuzz-work";
  int parallelism = 1;
  double timeout_s = 60;  // per (model, backend) job
  Isolation isolation = Isolation::kProcess;

  // Throws ConfigError: fewer than two backends, unknown backend ids,
  // non-positive timeout or parallelism, plus the nested validations.
  void validate() const;
};

// Parses the documented key = value format. '#' starts a comment; unknown
// keys and malformed values throw ConfigError naming the line.
CampaignConfig parse_campaign_config(const std::string& text);
CampaignConfig load_campaign_config(const std::filesystem::path& path);
// Renders every key, so parse_campaign_config(render(cfg)) reproduces cfg.
std::string render_campaign_config(const CampaignConfig& cfg);

// The configured workdir unless the environment override is set.
std::filesystem::path resolve_workdir(const std::filesystem::path& configured);

// Workdir layout.
std::filesystem::path model_dir(const std::filesystem::path& workdir,
                                const std::string& model_id);
std::filesystem::path trace_path(const std::filesystem::path& workdir,
                                 const std::string& model_id,
                                 const std::string& backend);

// Executes one backend on one persisted model and writes its trace. With
// process isolation the job runs in a child; an abort, a signal or a
// timeout becomes a crash trace whose message names the cause and ends with
// the child's last stderr line.
TraceBundle run_job(const CampaignConfig& cfg, const ModelSpec& spec,
                    const std::string& backend);

struct CoverageReport {
  std::vector<std::string> registered_kinds;
  std::vector<std::string> used_kinds;  // registered kinds seen in a model
  std::vector<std::string> registered_losses;
  std::vector<std::string> used_losses;
  std::map<std::string, int64_t> kind_counts;  // nodes per kind
  double functionality_coverage = 0;           // percent of layer kinds
  double loss_coverage = 0;                    // percent of loss kinds
};

// Registered kinds are the selectable kinds minus `excluded`; internal and
// excluded kinds never count.
CoverageReport coverage_report(const std::vector<ModelSpec>& models,
                               const std::vector<std::string>& excluded);
// Reads the persisted models and exclusion list of a campaign workdir.
CoverageReport coverage_report(const std::filesystem::path& workdir);
std::string coverage_to_json(const CoverageReport& coverage);

struct CampaignSummary {
  std::filesystem::path workdir;
  InconsistencyReport report;
  CoverageReport coverage;
  int64_t jobs = 0;
  int64_t crashed_jobs = 0;
  double generation_seconds = 0;
  double execution_seconds = 0;
  double total_seconds = 0;
};

// Generates, executes, detects and persists:
//   <workdir>/campaign.cfg              the effective configuration
//   <workdir>/generation.json           seed, retries, usage counters
//   <workdir>/models/<id>/              one ModelSpec directory per model
//   <workdir>/traces/<id>/<backend>.trace
//   <workdir>/report.json, report.txt   detector output
//   <workdir>/coverage.json, summary.json
// Generation or I/O failures throw; everything written so far stays.
CampaignSummary run_campaign(const CampaignConfig& cfg);

// Detection over the persisted traces of a workdir, with a new detector
// configuration.
InconsistencyReport report_from_workdir(const std::filesystem::path& workdir,
                                        const DetectorConfig& detector);

struct ReplayResult {
  ModelAnalysis analysis;
  // Backends whose fresh trace differs bitwise from the persisted one.
  std::vector<std::string> mismatched;
};

// Re-executes one persisted model on `backends` (all campaign backends when
// empty) and re-runs detection. A backend that was not part of the campaign,
// or a missing artifact, throws Error.
ReplayResult replay(const std::filesystem::path& workdir, const std::string& model_id,
                    const std::vector<std::string>& backends,
                    const DetectorConfig& detector);

}  // namespace archfuzz

#endif  // ARCHFUZZ_CAMPAIGN_H_
