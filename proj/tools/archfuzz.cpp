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

// archfuzz: command-line front end.
//
//   archfuzz generate  --n-models N --out DIR ...
//   archfuzz run       --model DIR --backend ID --trace-out FILE
//   archfuzz compare   --traces DIR --t 0.15 --epsilon 1e-5 --report FILE
//   archfuzz campaign  --config FILE
//   archfuzz report    --workdir DIR --format table|manifest
//   archfuzz replay    --workdir DIR --model ID
//   archfuzz gradcheck --model DIR
//   archfuzz backends
//
// Exit codes: `run` returns 0, 1 or 2 for an ok, nan or crash trace.
// `campaign` and `compare` return 1 when a finding or crash event survives
// deduplication. Any command returns 3 on a usage, configuration or I/O
// error.
#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "archfuzz/blob_io.h"
#include "archfuzz/campaign.h"
#include "archfuzz/detector.h"
#include "archfuzz/engine.h"
#include "archfuzz/errors.h"
#include "archfuzz/generator.h"
#include "json.hpp"

namespace {

using namespace archfuzz;
namespace fs = std::filesystem;

constexpr int kExitIssues = 1;
constexpr int kExitError = 3;

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (char c : text + ",") {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else if (c != ' ') {
      item += c;
    }
  }
  return out;
}

struct DetectorFlags {
  double t = 0.15;
  double epsilon = 1e-5;
  bool scale_lc = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--t", t, "Inconsistency threshold")->capture_default_str();
    cmd->add_option("--epsilon", epsilon, "Benign-deviation bound")->capture_default_str();
    cmd->add_flag("--scale-lc-by-loss", scale_lc,
                  "Scale t by the loss kind's output scale for LC comparisons");
  }
  DetectorConfig config() const {
    DetectorConfig d;
    d.t = t;
    d.epsilon = epsilon;
    d.scale_lc_by_loss = scale_lc;
    d.validate();
    return d;
  }
};

void print_report(const InconsistencyReport& report, const std::string& format) {
  std::cout << (format == "manifest" ? report_to_json(report) : report_to_text(report));
}

int cmd_generate(const GenerationConfig& g, const fs::path& out) {
  const GenerationResult r = generate_models(g);
  nlohmann::json ids = nlohmann::json::array();
  for (const ModelSpec& m : r.models) {
    save_model_spec(m, out / m.model_id);
    ids.push_back(m.model_id);
  }
  const nlohmann::json manifest{{"seed", g.seed},
                                {"n_models", g.n_models},
                                {"retries", r.retries},
                                {"excluded_kinds", g.excluded_kinds},
                                {"usage_counts", r.stats.counts()},
                                {"models", ids}};
  write_file_atomic(out / "generation.json", manifest.dump(2) + "\n");
  std::cout << "generated " << r.models.size() << " models in " << out.string() << "\n";
  return 0;
}

int cmd_run(const fs::path& model, const std::string& backend, const fs::path& trace_out) {
  const ModelSpec spec = load_model_spec(model);
  parse_backend_id(backend);
  const TraceBundle bundle = run_backend(backend, spec);
  if (trace_out.has_parent_path()) fs::create_directories(trace_out.parent_path());
  write_trace(bundle, trace_out);
  if (bundle.outcome == Outcome::kCrash) std::cerr << bundle.message << "\n";
  return bundle.outcome == Outcome::kOk ? 0 : bundle.outcome == Outcome::kNan ? 1 : 2;
}

int cmd_compare(const fs::path& dir, const DetectorConfig& d, const std::string& report_path,
                const std::string& format) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::map<std::string, std::vector<TraceBundle>> by_model;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".trace") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) {
    TraceBundle b = read_trace(f);
    by_model[b.model_id].push_back(std::move(b));
  }
  if (by_model.empty()) throw Error("no .trace files under " + dir.string());
  ReportBuilder builder(d);
  for (auto& [id, bundles] : by_model) {
    std::sort(bundles.begin(), bundles.end(),
              [](const TraceBundle& a, const TraceBundle& b) { return a.backend_id < b.backend_id; });
    builder.add(analyze_model(bundles, d));
  }
  const InconsistencyReport report = builder.finish();
  if (!report_path.empty()) {
    const fs::path path(report_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, report_to_json(report));
  }
  print_report(report, format);
  return report.has_issues() ? kExitIssues : 0;
}

int cmd_campaign(const fs::path& config_path, const std::string& workdir, int parallelism) {
  CampaignConfig cfg = load_campaign_config(config_path);
  if (!workdir.empty()) cfg.workdir = workdir;
  if (parallelism > 0) cfg.parallelism = parallelism;
  const CampaignSummary s = run_campaign(cfg);
  std::cout << report_to_text(s.report);
  std::printf(
      "\ncoverage: %.3f%% of layer kinds (%zu/%zu), %.3f%% of loss kinds\n"
      "jobs: %lld (%lld crashed)  time: %.1fs generation, %.1fs execution, %.1fs total\n"
      "artifacts: %s\n",
      s.coverage.functionality_coverage, s.coverage.used_kinds.size(),
      s.coverage.registered_kinds.size(), s.coverage.loss_coverage,
      static_cast<long long>(s.jobs), static_cast<long long>(s.crashed_jobs),
      s.generation_seconds, s.execution_seconds, s.total_seconds, s.workdir.c_str());
  return s.report.has_issues() ? kExitIssues : 0;
}

int cmd_report(const fs::path& workdir_flag, const std::string& format, const DetectorFlags& flags,
               bool redetect) {
  const fs::path workdir = resolve_workdir(workdir_flag);
  if (!redetect) {
    const fs::path cached = workdir / (format == "manifest" ? "report.json" : "report.txt");
    if (!fs::exists(cached)) throw Error("no report in " + workdir.string());
    std::cout << read_file(cached);
    return 0;
  }
  print_report(report_from_workdir(workdir, flags.config()), format);
  return 0;
}

int cmd_replay(const fs::path& workdir_flag, const std::string& model,
               const std::string& backends, const DetectorFlags& flags) {
  const fs::path workdir = resolve_workdir(workdir_flag);
  const DetectorConfig d = flags.config();
  const ReplayResult r = replay(workdir, model, split_commas(backends), d);
  ReportBuilder builder(d);
  builder.add(r.analysis);
  std::cout << report_to_text(builder.finish());
  if (r.mismatched.empty()) {
    std::cout << "replay: traces bitwise identical to the persisted run\n";
  } else {
    std::cout << "replay: traces differ from the persisted run for";
    for (const std::string& b : r.mismatched) std::cout << " " << b;
    std::cout << "\n";
  }
  return 0;
}

int cmd_gradcheck(const fs::path& model, const std::string& backend) {
  GradientCheckOptions o;
  o.backend = backend;
  const GradientCheckReport r = check_gradients(load_model_spec(model), o);
  if (!r.evaluable) {
    std::cout << "not evaluable: " << r.reason << "\n";
    return 0;
  }
  std::printf("checked %lld elements (%lld excluded at kinks), max relative error %.3g\n",
              static_cast<long long>(r.checked), static_cast<long long>(r.excluded),
              r.max_rel_error);
  return 0;
}

int cmd_backends() {
  std::cout << "honest:\n  naive\n  reordered\nmutants (naive + one seeded fault):\n";
  for (const std::string& f : fault_classes()) std::cout << "  naive+" << f << "\n";
  std::cout << "debug (crash-isolation checks):\n";
  for (const std::string& f : debug_faults()) {
    if (f != "none") std::cout << "  naive+" << f << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-architecture fuzzing and differential backend testing"};
  app.require_subcommand(1);

  // generate
  GenerationConfig gen;
  std::string input_shape = gen.input_shape.to_string();
  std::string output_shape = gen.output_shape.to_string();
  std::string exclude;
  std::string losses;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "Generate ModelSpec directories");
  generate->add_option("--n-models", gen.n_models)->capture_default_str();
  generate->add_option("--max-cells", gen.max_cells)->capture_default_str();
  generate->add_option("--max-vertices", gen.max_vertices)->capture_default_str();
  generate->add_option("--input-shape", input_shape, "Per-example shape, e.g. 8x8x3")
      ->capture_default_str();
  generate->add_option("--output-shape", output_shape)->capture_default_str();
  generate->add_option("--seed", gen.seed)->capture_default_str();
  generate->add_option("--batch-size", gen.batch_size)->capture_default_str();
  generate->add_option("--exclude", exclude,
                       "Comma-separated layer kinds to exclude (default: stochastic kinds)");
  generate->add_option("--losses", losses, "Comma-separated loss kinds (default: all)");
  generate->add_option("--p-chain", gen.p_chain)->capture_default_str();
  generate->add_flag("--trigger-bias", gen.trigger_bias, "Use the trigger-biased schema");
  generate->add_option("--nan-inputs", gen.nan_inputs)->capture_default_str();
  generate->add_option("--out", gen_out, "Output directory")->required();

  // run
  std::string run_model, run_backend_id, run_trace;
  auto* run = app.add_subcommand("run", "Execute one training step on one backend");
  run->add_option("--model", run_model, "ModelSpec directory")->required();
  run->add_option("--backend", run_backend_id, "Backend id")->required();
  run->add_option("--trace-out", run_trace, "Trace file to write")->required();

  // compare
  std::string traces_dir, report_file, compare_format = "table";
  DetectorFlags compare_flags;
  auto* compare = app.add_subcommand("compare", "Detect inconsistencies among trace files");
  compare->add_option("--traces", traces_dir, "Directory searched recursively for .trace files")
      ->required();
  compare->add_option("--report", report_file, "Write the JSON manifest here");
  compare->add_option("--format", compare_format, "Stdout format")
      ->check(CLI::IsMember({"table", "manifest"}))
      ->capture_default_str();
  compare_flags.add_to(compare);

  // campaign
  std::string config_file, campaign_workdir;
  int parallelism = 0;
  auto* campaign = app.add_subcommand("campaign", "Run an end-to-end campaign");
  campaign->add_option("--config", config_file, "key = value configuration file")->required();
  campaign->add_option("--workdir", campaign_workdir, "Override the configured workdir");
  campaign->add_option("--parallelism", parallelism, "Override the configured worker count");

  // report
  std::string report_workdir = "archfuzz-work", report_format = "table";
  DetectorFlags report_flags;
  bool redetect = false;
  auto* report = app.add_subcommand("report", "Show or recompute a campaign's report");
  report->add_option("--workdir", report_workdir)->capture_default_str();
  report->add_option("--format", report_format)
      ->check(CLI::IsMember({"table", "manifest"}))
      ->capture_default_str();
  report->add_flag("--redetect", redetect, "Re-run detection over the persisted traces");
  report_flags.add_to(report);

  // replay
  std::string replay_workdir = "archfuzz-work", replay_model, replay_backends;
  DetectorFlags replay_flags;
  auto* replay_cmd = app.add_subcommand("replay", "Re-execute and re-detect one persisted model");
  replay_cmd->add_option("--workdir", replay_workdir)->capture_default_str();
  replay_cmd->add_option("--model", replay_model, "Model id, e.g. m00012")->required();
  replay_cmd->add_option("--backends", replay_backends,
                         "Comma-separated subset of the campaign's backends");
  replay_flags.add_to(replay_cmd);

  // gradcheck
  std::string grad_model, grad_backend = "naive";
  auto* gradcheck = app.add_subcommand("gradcheck", "Check BC gradients by finite differences");
  gradcheck->add_option("--model", grad_model, "ModelSpec directory")->required();
  gradcheck->add_option("--backend", grad_backend)->capture_default_str();

  auto* backends = app.add_subcommand("backends", "List built-in backends");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (generate->parsed()) {
      gen.input_shape = TensorShape::parse(input_shape);
      gen.output_shape = TensorShape::parse(output_shape);
      if (generate->count("--exclude")) gen.excluded_kinds = split_commas(exclude);
      gen.loss_kinds = split_commas(losses);
      return cmd_generate(gen, gen_out);
    }
    if (run->parsed()) return cmd_run(run_model, run_backend_id, run_trace);
    if (compare->parsed()) {
      return cmd_compare(traces_dir, compare_flags.config(), report_file, compare_format);
    }
    if (campaign->parsed()) return cmd_campaign(config_file, campaign_workdir, parallelism);
    if (report->parsed()) {
      const bool recompute = redetect || report->count("--t") || report->count("--epsilon") ||
                             report->count("--scale-lc-by-loss");
      return cmd_report(report_workdir, report_format, report_flags, recompute);
    }
    if (replay_cmd->parsed()) {
      return cmd_replay(replay_workdir, replay_model, replay_backends, replay_flags);
    }
    if (gradcheck->parsed()) return cmd_gradcheck(grad_model, grad_backend);
    if (backends->parsed()) return cmd_backends();
  } catch (const std::exception& e) {
    std::cerr << "archfuzz: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
