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

// End-to-end campaigns: generate, execute in isolation, detect, persist.
#include <algorithm>
#include <chrono>
#include <set>

#include "archfuzz/blob_io.h"
#include "archfuzz/campaign.h"
#include "archfuzz/errors.h"
#include "archfuzz/layer_kind.h"
#include "json.hpp"
#include "runner.h"

namespace archfuzz {

using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, text);
}

std::vector<std::string> persisted_model_ids(const std::filesystem::path& workdir) {
  const std::filesystem::path dir = workdir / "models";
  if (!std::filesystem::is_directory(dir)) {
    throw Error("no models directory in " + workdir.string());
  }
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory()) ids.push_back(entry.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

CampaignConfig persisted_config(const std::filesystem::path& workdir) {
  const std::filesystem::path path = workdir / "campaign.cfg";
  if (!std::filesystem::exists(path)) throw Error("no campaign.cfg in " + workdir.string());
  return load_campaign_config(path);
}

std::vector<JobSpec> jobs_for(const CampaignConfig& cfg, const ModelSpec& spec,
                              const std::filesystem::path& workdir,
                              const std::vector<std::string>& backends,
                              const std::filesystem::path& trace_root) {
  std::vector<JobSpec> jobs;
  for (const std::string& backend : backends) {
    JobSpec job;
    job.spec = &spec;
    job.model_dir = model_dir(workdir, spec.model_id);
    job.backend = backend;
    auto ext = cfg.external.find(backend);
    if (ext != cfg.external.end()) job.external_command = ext->second;
    job.trace_out = trace_root / spec.model_id / (backend + ".trace");
    jobs.push_back(std::move(job));
  }
  return jobs;
}

json generation_manifest(const CampaignConfig& cfg, const GenerationResult& gen) {
  json ids = json::array();
  for (const ModelSpec& m : gen.models) ids.push_back(m.model_id);
  return json{{"seed", cfg.generation.seed},
              {"n_models", cfg.generation.n_models},
              {"retries", gen.retries},
              {"excluded_kinds", cfg.generation.excluded_kinds},
              {"usage_counts", gen.stats.counts()},
              {"models", ids}};
}

}  // namespace

CoverageReport coverage_report(const std::vector<ModelSpec>& models,
                               const std::vector<std::string>& excluded) {
  if (models.empty()) throw Error("coverage needs at least one model");
  CoverageReport c;
  for (Arity a : {Arity::kSingle, Arity::kMulti}) {
    for (const LayerKind* k : selectable_kinds(a, excluded)) c.registered_kinds.push_back(k->name);
  }
  std::sort(c.registered_kinds.begin(), c.registered_kinds.end());
  for (const LossKind& l : loss_registry()) c.registered_losses.push_back(l.name);
  std::sort(c.registered_losses.begin(), c.registered_losses.end());

  std::set<std::string> losses;
  for (const ModelSpec& m : models) {
    losses.insert(m.loss);
    for (const Node& n : m.graph.nodes) ++c.kind_counts[n.kind];
  }
  for (const std::string& k : c.registered_kinds) {
    if (c.kind_counts.count(k)) c.used_kinds.push_back(k);
  }
  for (const std::string& l : c.registered_losses) {
    if (losses.count(l)) c.used_losses.push_back(l);
  }
  c.functionality_coverage =
      100.0 * static_cast<double>(c.used_kinds.size()) / static_cast<double>(c.registered_kinds.size());
  c.loss_coverage = 100.0 * static_cast<double>(c.used_losses.size()) /
                    static_cast<double>(c.registered_losses.size());
  return c;
}

CoverageReport coverage_report(const std::filesystem::path& workdir) {
  const CampaignConfig cfg = persisted_config(workdir);
  std::vector<ModelSpec> models;
  for (const std::string& id : persisted_model_ids(workdir)) {
    models.push_back(load_model_spec(model_dir(workdir, id)));
  }
  return coverage_report(models, cfg.generation.excluded_kinds);
}

std::string coverage_to_json(const CoverageReport& c) {
  std::vector<std::string> unused;
  std::set_difference(c.registered_kinds.begin(), c.registered_kinds.end(),
                      c.used_kinds.begin(), c.used_kinds.end(), std::back_inserter(unused));
  const json j{{"functionality_coverage", c.functionality_coverage},
               {"loss_coverage", c.loss_coverage},
               {"registered_kinds", c.registered_kinds.size()},
               {"used_kinds", c.used_kinds.size()},
               {"unused_kinds", unused},
               {"registered_losses", c.registered_losses.size()},
               {"used_losses", c.used_losses},
               {"kind_counts", c.kind_counts}};
  return j.dump(2) + "\n";
}

TraceBundle run_job(const CampaignConfig& cfg, const ModelSpec& spec, const std::string& backend) {
  const std::filesystem::path workdir = resolve_workdir(cfg.workdir);
  const std::filesystem::path dir = model_dir(workdir, spec.model_id);
  if (!std::filesystem::exists(dir / "model.json")) save_model_spec(spec, dir);
  TraceBundle out;
  run_jobs(jobs_for(cfg, spec, workdir, {backend}, workdir / "traces"), cfg.isolation, 1,
           cfg.timeout_s, [&](size_t, TraceBundle b) { out = std::move(b); });
  return out;
}

CampaignSummary run_campaign(const CampaignConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  CampaignConfig cfg = config;
  cfg.workdir = resolve_workdir(config.workdir);
  const std::filesystem::path& workdir = cfg.workdir;
  try {
    std::filesystem::create_directories(workdir);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError("cannot create workdir " + workdir.string() + ": " + e.what());
  }
  write_text(workdir / "campaign.cfg", render_campaign_config(cfg));

  CampaignSummary summary;
  summary.workdir = workdir;
  const GenerationResult gen = generate_models(cfg.generation);
  for (const ModelSpec& m : gen.models) save_model_spec(m, model_dir(workdir, m.model_id));
  write_text(workdir / "generation.json", generation_manifest(cfg, gen).dump(2) + "\n");
  summary.generation_seconds = seconds_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  std::vector<JobSpec> jobs;
  for (const ModelSpec& m : gen.models) {
    for (JobSpec& j : jobs_for(cfg, m, workdir, cfg.backends, workdir / "traces")) {
      jobs.push_back(std::move(j));
    }
  }
  // Jobs are laid out model-major, so job / |backends| is the model index and
  // job % |backends| the backend's position.
  const size_t nb = cfg.backends.size();
  std::vector<std::vector<TraceBundle>> pending(gen.models.size(), std::vector<TraceBundle>(nb));
  std::vector<size_t> remaining(gen.models.size(), nb);
  ReportBuilder builder(cfg.detector);
  run_jobs(jobs, cfg.isolation, cfg.parallelism, cfg.timeout_s, [&](size_t job, TraceBundle b) {
    const size_t model = job / nb;
    if (b.outcome == Outcome::kCrash) ++summary.crashed_jobs;
    pending[model][job % nb] = std::move(b);
    if (--remaining[model] == 0) {
      builder.add(analyze_model(pending[model], cfg.detector));
      pending[model].clear();
      pending[model].shrink_to_fit();
    }
  });
  summary.jobs = static_cast<int64_t>(jobs.size());
  summary.execution_seconds = seconds_since(t1);

  summary.report = builder.finish();
  write_text(workdir / "report.json", report_to_json(summary.report));
  write_text(workdir / "report.txt", report_to_text(summary.report));
  if (!gen.models.empty()) {
    summary.coverage = coverage_report(gen.models, cfg.generation.excluded_kinds);
    write_text(workdir / "coverage.json", coverage_to_json(summary.coverage));
  }
  summary.total_seconds = seconds_since(t0);
  const json s{{"models", gen.models.size()},
               {"jobs", summary.jobs},
               {"crashed_jobs", summary.crashed_jobs},
               {"findings", summary.report.findings.size()},
               {"nan_events", summary.report.nan_events.size()},
               {"crash_events", summary.report.crash_events.size()},
               {"functionality_coverage", summary.coverage.functionality_coverage},
               {"loss_coverage", summary.coverage.loss_coverage},
               {"generation_seconds", summary.generation_seconds},
               {"execution_seconds", summary.execution_seconds},
               {"total_seconds", summary.total_seconds}};
  write_text(workdir / "summary.json", s.dump(2) + "\n");
  return summary;
}

InconsistencyReport report_from_workdir(const std::filesystem::path& workdir,
                                        const DetectorConfig& detector) {
  detector.validate();
  const CampaignConfig cfg = persisted_config(workdir);
  ReportBuilder builder(detector);
  for (const std::string& id : persisted_model_ids(workdir)) {
    std::vector<TraceBundle> bundles;
    for (const std::string& backend : cfg.backends) {
      bundles.push_back(read_trace(trace_path(workdir, id, backend)));
    }
    builder.add(analyze_model(bundles, detector));
  }
  return builder.finish();
}

ReplayResult replay(const std::filesystem::path& workdir, const std::string& model_id,
                    const std::vector<std::string>& backends, const DetectorConfig& detector) {
  detector.validate();
  CampaignConfig cfg = persisted_config(workdir);
  cfg.workdir = workdir;
  const std::vector<std::string> chosen = backends.empty() ? cfg.backends : backends;
  if (chosen.size() < 2) throw Error("replay needs at least two backends");
  for (const std::string& b : chosen) {
    if (std::find(cfg.backends.begin(), cfg.backends.end(), b) == cfg.backends.end()) {
      throw Error("backend '" + b + "' was not part of the campaign in " + workdir.string());
    }
  }
  const std::filesystem::path dir = model_dir(workdir, model_id);
  if (!std::filesystem::exists(dir / "model.json")) {
    throw Error("no persisted model '" + model_id + "' in " + workdir.string());
  }
  const ModelSpec spec = load_model_spec(dir);

  ReplayResult result;
  std::vector<TraceBundle> bundles(chosen.size());
  const std::filesystem::path root = workdir / "replay";
  const std::vector<JobSpec> jobs = jobs_for(cfg, spec, workdir, chosen, root);
  run_jobs(jobs, cfg.isolation, cfg.parallelism, cfg.timeout_s,
           [&](size_t job, TraceBundle b) { bundles[job] = std::move(b); });
  for (size_t i = 0; i < chosen.size(); ++i) {
    const std::filesystem::path original = trace_path(workdir, model_id, chosen[i]);
    if (!std::filesystem::exists(original)) throw Error("missing trace " + original.string());
    if (read_file(original) != read_file(jobs[i].trace_out)) result.mismatched.push_back(chosen[i]);
  }
  result.analysis = analyze_model(bundles, detector);
  return result;
}

}  // namespace archfuzz
