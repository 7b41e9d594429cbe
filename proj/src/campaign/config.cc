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

// Campaign configuration: validation and the key = value file format.
#include <cctype>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "archfuzz/blob_io.h"
#include "archfuzz/campaign.h"
#include "archfuzz/engine.h"
#include "archfuzz/errors.h"

namespace archfuzz {

namespace {

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (const std::string& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

bool valid_backend_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
                    c == '.' || c == '+';
    if (!ok) return false;
  }
  return true;
}

template <typename T>
T parse_number(const std::string& value) {
  std::istringstream is(value);
  T v;
  is >> v;
  if (is.fail() || !is.eof()) throw ConfigError("expected a number, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("expected true or false, got '" + value + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void CampaignConfig::validate() const {
  generation.validate();
  detector.validate();
  if (backends.size() < 2) throw ConfigError("a campaign needs at least two backends");
  for (size_t i = 0; i < backends.size(); ++i) {
    for (size_t j = 0; j < i; ++j) {
      if (backends[i] == backends[j]) throw ConfigError("duplicate backend '" + backends[i] + "'");
    }
    if (external.count(backends[i])) continue;
    try {
      parse_backend_id(backends[i]);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  for (const auto& [name, command] : external) {
    if (!valid_backend_name(name)) throw ConfigError("invalid external backend name '" + name + "'");
    if (trim(command).empty()) throw ConfigError("external backend '" + name + "' has no command");
  }
  if (!(timeout_s > 0)) throw ConfigError("timeout must be > 0");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (workdir.empty()) throw ConfigError("workdir must not be empty");
  if (isolation == Isolation::kNone && !external.empty()) {
    throw ConfigError("external backends need process isolation");
  }
}

CampaignConfig parse_campaign_config(const std::string& text) {
  CampaignConfig cfg;
  GenerationConfig& g = cfg.generation;
  DetectorConfig& d = cfg.detector;
  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"n_models", [&](const std::string& v) { g.n_models = parse_number<int>(v); }},
      {"seed", [&](const std::string& v) { g.seed = parse_number<uint64_t>(v); }},
      {"max_cells", [&](const std::string& v) { g.max_cells = parse_number<int>(v); }},
      {"max_vertices", [&](const std::string& v) { g.max_vertices = parse_number<int>(v); }},
      {"input_shape", [&](const std::string& v) { g.input_shape = TensorShape::parse(v); }},
      {"output_shape", [&](const std::string& v) { g.output_shape = TensorShape::parse(v); }},
      {"batch_size", [&](const std::string& v) { g.batch_size = parse_number<int64_t>(v); }},
      {"exclude", [&](const std::string& v) { g.excluded_kinds = split_list(v); }},
      {"losses", [&](const std::string& v) { g.loss_kinds = split_list(v); }},
      {"p_chain", [&](const std::string& v) { g.p_chain = parse_number<double>(v); }},
      {"p_skip", [&](const std::string& v) { g.p_skip = parse_number<double>(v); }},
      {"element_budget", [&](const std::string& v) { g.element_budget = parse_number<int64_t>(v); }},
      {"parameter_budget",
       [&](const std::string& v) { g.parameter_budget = parse_number<int64_t>(v); }},
      {"trigger_bias", [&](const std::string& v) { g.trigger_bias = parse_bool(v); }},
      {"nan_inputs", [&](const std::string& v) { g.nan_inputs = parse_number<int>(v); }},
      {"t", [&](const std::string& v) { d.t = parse_number<double>(v); }},
      {"epsilon", [&](const std::string& v) { d.epsilon = parse_number<double>(v); }},
      {"scale_lc_by_loss", [&](const std::string& v) { d.scale_lc_by_loss = parse_bool(v); }},
      {"backends", [&](const std::string& v) { cfg.backends = split_list(v); }},
      {"workdir", [&](const std::string& v) { cfg.workdir = v; }},
      {"parallelism", [&](const std::string& v) { cfg.parallelism = parse_number<int>(v); }},
      {"timeout", [&](const std::string& v) { cfg.timeout_s = parse_number<double>(v); }},
      {"isolation",
       [&](const std::string& v) {
         if (v == "process") {
           cfg.isolation = Isolation::kProcess;
         } else if (v == "none") {
           cfg.isolation = Isolation::kNone;
         } else {
           throw ConfigError("isolation must be 'process' or 'none'");
         }
       }},
  };

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key.rfind("external.", 0) == 0) {
        cfg.external[key.substr(9)] = value;
        continue;
      }
      auto it = setters.find(key);
      if (it == setters.end()) throw ConfigError("unknown key '" + key + "'");
      it->second(value);
    } catch (const Error& e) {
      throw ConfigError(where + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  return parse_campaign_config(read_file(path));
}

std::string render_campaign_config(const CampaignConfig& cfg) {
  const GenerationConfig& g = cfg.generation;
  const DetectorConfig& d = cfg.detector;
  std::ostringstream os;
  os << "# generation\n"
     << "n_models = " << g.n_models << "\n"
     << "seed = " << g.seed << "\n"
     << "max_cells = " << g.max_cells << "\n"
     << "max_vertices = " << g.max_vertices << "\n"
     << "input_shape = " << g.input_shape.to_string() << "\n"
     << "output_shape = " << g.output_shape.to_string() << "\n"
     << "batch_size = " << g.batch_size << "\n"
     << "exclude = " << join_list(g.excluded_kinds) << "\n"
     << "losses = " << join_list(g.loss_kinds) << "\n"
     << "p_chain = " << format_double(g.p_chain) << "\n"
     << "p_skip = " << format_double(g.p_skip) << "\n"
     << "element_budget = " << g.element_budget << "\n"
     << "parameter_budget = " << g.parameter_budget << "\n"
     << "trigger_bias = " << (g.trigger_bias ? "true" : "false") << "\n"
     << "nan_inputs = " << g.nan_inputs << "\n"
     << "# detection\n"
     << "t = " << format_double(d.t) << "\n"
     << "epsilon = " << format_double(d.epsilon) << "\n"
     << "scale_lc_by_loss = " << (d.scale_lc_by_loss ? "true" : "false") << "\n"
     << "# execution\n"
     << "backends = " << join_list(cfg.backends) << "\n"
     << "workdir = " << cfg.workdir.string() << "\n"
     << "parallelism = " << cfg.parallelism << "\n"
     << "timeout = " << format_double(cfg.timeout_s) << "\n"
     << "isolation = " << (cfg.isolation == Isolation::kProcess ? "process" : "none") << "\n";
  for (const auto& [name, command] : cfg.external) {
    os << "external." << name << " = " << command << "\n";
  }
  return os.str();
}

std::filesystem::path resolve_workdir(const std::filesystem::path& configured) {
  const char* env = std::getenv(kWorkdirEnv);
  if (env != nullptr && *env != '\0') return env;
  return configured;
}

std::filesystem::path model_dir(const std::filesystem::path& workdir,
                                const std::string& model_id) {
  return workdir / "models" / model_id;
}

std::filesystem::path trace_path(const std::filesystem::path& workdir,
                                 const std::string& model_id, const std::string& backend) {
  return workdir / "traces" / model_id / (backend + ".trace");
}

}  // namespace archfuzz
