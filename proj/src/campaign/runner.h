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

#ifndef ARCHFUZZ_CAMPAIGN_RUNNER_H_
#define ARCHFUZZ_CAMPAIGN_RUNNER_H_

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "archfuzz/campaign.h"

namespace archfuzz {

struct JobSpec {
  const ModelSpec* spec = nullptr;
  std::filesystem::path model_dir;  // persisted copy of *spec
  std::string backend;
  std::string external_command;  // empty for built-in backends
  std::filesystem::path trace_out;
};

// A crash trace for `spec` carrying the node list and no tensors.
TraceBundle crash_bundle(const ModelSpec& spec, const std::string& backend,
                         const std::string& message);

// Runs every job, at most `parallelism` at a time, and calls `done` in
// completion order. Each job's trace is on disk before `done` sees it.
void run_jobs(const std::vector<JobSpec>& jobs, Isolation isolation, int parallelism,
              double timeout_s, const std::function<void(size_t, TraceBundle)>& done);

}  // namespace archfuzz

#endif  // ARCHFUZZ_CAMPAIGN_RUNNER_H_
