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

// Python bindings for the archfuzz core.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "archfuzz/campaign.h"
#include "archfuzz/detector.h"
#include "archfuzz/engine.h"
#include "archfuzz/errors.h"
#include "archfuzz/generator.h"
#include "archfuzz/trace.h"

namespace py = pybind11;
namespace fs = std::filesystem;

namespace archfuzz {
namespace {

py::array_t<float> to_numpy(const Tensor<float>& t) {
  py::array_t<float> a(t.dims);
  std::copy(t.data.begin(), t.data.end(), a.mutable_data());
  return a;
}

Tensor<float> from_numpy(const py::handle& h) {
  const auto a = py::array_t<float, py::array::c_style | py::array::forcecast>::ensure(h);
  if (!a) throw Error("expected a float32-convertible array");
  std::vector<int64_t> dims(a.shape(), a.shape() + a.ndim());
  return Tensor<float>(dims, std::vector<float>(a.data(), a.data() + a.size()));
}

py::object optional_tensor(const std::optional<Tensor<float>>& t) {
  return t ? py::object(to_numpy(*t)) : py::object(py::none());
}

py::dict bundle_to_dict(const TraceBundle& b) {
  py::dict d;
  d["backend_id"] = b.backend_id;
  d["model_id"] = b.model_id;
  d["loss"] = b.loss;
  d["precision"] = b.precision;
  d["outcome"] = std::string(outcome_name(b.outcome));
  d["message"] = b.message;
  py::list nodes, fc, bc;
  for (const TraceNode& n : b.nodes) {
    py::dict node;
    node["id"] = n.id;
    node["kind"] = n.kind;
    node["preds"] = n.preds;
    nodes.append(node);
  }
  for (const auto& t : b.fc) fc.append(optional_tensor(t));
  for (const auto& grads : b.bc) {
    py::list per_input;
    for (const Tensor<float>& g : grads) per_input.append(to_numpy(g));
    bc.append(per_input);
  }
  d["nodes"] = nodes;
  d["fc"] = fc;
  d["bc"] = bc;
  d["lo"] = optional_tensor(b.lo);
  d["lg"] = optional_tensor(b.lg);
  return d;
}

TraceBundle bundle_from_dict(const py::dict& d) {
  TraceBundle b;
  b.backend_id = d["backend_id"].cast<std::string>();
  b.model_id = d["model_id"].cast<std::string>();
  b.loss = d.contains("loss") ? d["loss"].cast<std::string>() : "";
  b.precision = d.contains("precision") ? d["precision"].cast<std::string>() : "f32";
  b.outcome = parse_outcome(d["outcome"].cast<std::string>());
  b.message = d.contains("message") ? d["message"].cast<std::string>() : "";
  for (const py::handle& n : d["nodes"].cast<py::list>()) {
    const py::dict node = n.cast<py::dict>();
    b.nodes.push_back({node["id"].cast<int>(), node["kind"].cast<std::string>(),
                       node["preds"].cast<std::vector<int>>()});
  }
  const size_t n = b.nodes.size();
  b.fc.assign(n, std::nullopt);
  b.bc.assign(n, {});
  if (d.contains("fc")) {
    const py::list fc = d["fc"].cast<py::list>();
    for (size_t i = 0; i < std::min(n, fc.size()); ++i) {
      if (!fc[i].is_none()) b.fc[i] = from_numpy(fc[i]);
    }
  }
  if (d.contains("bc")) {
    const py::list bc = d["bc"].cast<py::list>();
    for (size_t i = 0; i < std::min(n, bc.size()); ++i) {
      if (bc[i].is_none()) continue;
      for (const py::handle& g : bc[i].cast<py::list>()) b.bc[i].push_back(from_numpy(g));
    }
  }
  if (d.contains("lo") && !d["lo"].is_none()) b.lo = from_numpy(d["lo"]);
  if (d.contains("lg") && !d["lg"].is_none()) b.lg = from_numpy(d["lg"]);
  return b;
}

std::vector<std::string> generate(const fs::path& out, int n_models, uint64_t seed,
                                  bool trigger_bias, int nan_inputs, int max_cells,
                                  int max_vertices, const std::string& input_shape,
                                  const std::string& output_shape) {
  GenerationConfig g;
  g.n_models = n_models;
  g.seed = seed;
  g.trigger_bias = trigger_bias;
  g.nan_inputs = nan_inputs;
  g.max_cells = max_cells;
  g.max_vertices = max_vertices;
  g.input_shape = TensorShape::parse(input_shape);
  g.output_shape = TensorShape::parse(output_shape);
  std::vector<std::string> ids;
  for (const ModelSpec& m : generate_models(g).models) {
    save_model_spec(m, out / m.model_id);
    ids.push_back(m.model_id);
  }
  return ids;
}

std::string compare(const std::vector<fs::path>& paths, double t, double epsilon,
                    bool scale_lc_by_loss) {
  DetectorConfig cfg;
  cfg.t = t;
  cfg.epsilon = epsilon;
  cfg.scale_lc_by_loss = scale_lc_by_loss;
  cfg.validate();
  std::map<std::string, std::vector<TraceBundle>> by_model;
  for (const fs::path& p : paths) {
    TraceBundle b = read_trace(p);
    by_model[b.model_id].push_back(std::move(b));
  }
  ReportBuilder builder(cfg);
  for (auto& [id, bundles] : by_model) builder.add(analyze_model(bundles, cfg));
  return report_to_json(builder.finish());
}

py::dict campaign(const std::string& config_text, const std::optional<fs::path>& workdir) {
  CampaignConfig cfg = parse_campaign_config(config_text);
  if (workdir) cfg.workdir = *workdir;
  CampaignSummary s;
  {
    py::gil_scoped_release release;
    s = run_campaign(cfg);
  }
  py::dict d;
  d["workdir"] = s.workdir;
  d["report"] = report_to_json(s.report);
  d["coverage"] = coverage_to_json(s.coverage);
  d["jobs"] = s.jobs;
  d["crashed_jobs"] = s.crashed_jobs;
  d["total_seconds"] = s.total_seconds;
  d["has_issues"] = s.report.has_issues();
  return d;
}

py::dict gradient_check(const fs::path& model, const std::string& backend) {
  GradientCheckOptions o;
  o.backend = backend;
  const GradientCheckReport r = check_gradients(load_model_spec(model), o);
  py::dict d;
  d["evaluable"] = r.evaluable;
  d["reason"] = r.reason;
  d["max_rel_error"] = r.max_rel_error;
  d["checked"] = r.checked;
  d["excluded"] = r.excluded;
  return d;
}

}  // namespace
}  // namespace archfuzz

PYBIND11_MODULE(_archfuzz, m) {
  using namespace archfuzz;
  m.doc() = "Neural-architecture fuzzing core: generation, reference backends, traces, detection";

  // Translators are tried newest first, so the base goes in before its subclasses.
  const auto& base = py::register_exception<Error>(m, "Error");
  py::register_exception<TraceError>(m, "TraceError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);

  m.def("backends", &list_backends, "Built-in honest and mutant backend ids.");
  m.def("fault_classes", &fault_classes, "Seeded fault class names.");
  m.def("generate", &generate, py::arg("out_dir"), py::arg("n_models") = 50,
        py::arg("seed") = 0, py::arg("trigger_bias") = false, py::arg("nan_inputs") = 0,
        py::arg("max_cells") = 5, py::arg("max_vertices") = 30,
        py::arg("input_shape") = "8x8x3", py::arg("output_shape") = "10",
        "Generate models into out_dir/<model_id>/ and return their ids.");
  m.def(
      "run",
      [](const fs::path& model, const std::string& backend, const fs::path& trace_out) {
        const ModelSpec spec = load_model_spec(model);
        TraceBundle b;
        {
          py::gil_scoped_release release;
          b = run_backend(backend, spec);
        }
        write_trace(b, trace_out);
        return std::string(outcome_name(b.outcome));
      },
      py::arg("model_dir"), py::arg("backend"), py::arg("trace_out"),
      "Run one training step and write the trace; returns the outcome name.");
  m.def(
      "read_trace", [](const fs::path& p) { return bundle_to_dict(read_trace(p)); },
      py::arg("path"), "Decode a trace file into a dict of numpy arrays.");
  m.def(
      "write_trace",
      [](const py::dict& d, const fs::path& p) { write_trace(bundle_from_dict(d), p); },
      py::arg("bundle"), py::arg("path"),
      "Encode a dict shaped like read_trace's result into a trace file.");
  m.def(
      "chebyshev",
      [](const py::handle& a, const py::handle& b) {
        const Distance d = chebyshev(from_numpy(a), from_numpy(b));
        return py::make_tuple(d.value, d.nan_tainted);
      },
      py::arg("a"), py::arg("b"), "Chebyshev distance and NaN taint of two arrays.");
  m.def("compare", &compare, py::arg("paths"), py::arg("t") = 0.15, py::arg("epsilon") = 1e-5,
        py::arg("scale_lc_by_loss") = false, "Detect over trace files; returns report JSON.");
  m.def("run_campaign", &campaign, py::arg("config_text"), py::arg("workdir") = py::none(),
        "Run a campaign from key = value configuration text.");
  m.def(
      "coverage", [](const fs::path& workdir) { return coverage_to_json(coverage_report(workdir)); },
      py::arg("workdir"), "Coverage of a campaign workdir as JSON.");
  m.def("check_gradients", &gradient_check, py::arg("model_dir"), py::arg("backend") = "naive",
        "Finite-difference check of a backend's BC gradients.");
}
