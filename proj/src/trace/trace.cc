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

#include "archfuzz/trace.h"

#include <algorithm>
#include <cstring>

#include "archfuzz/blob_io.h"
#include "json.hpp"

namespace archfuzz {

using nlohmann::json;

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::kOk:
      return "ok";
    case Outcome::kNan:
      return "nan";
    case Outcome::kCrash:
      return "crash";
  }
  return "?";
}

Outcome parse_outcome(std::string_view name) {
  if (name == "ok") return Outcome::kOk;
  if (name == "nan") return Outcome::kNan;
  if (name == "crash") return Outcome::kCrash;
  throw Error("unknown outcome '" + std::string(name) + "'");
}

int TraceBundle::sink() const {
  for (const TraceNode& n : nodes) {
    if (successors(n.id).empty()) return n.id;
  }
  return -1;
}

std::vector<int> TraceBundle::successors(int node) const {
  std::vector<int> out;
  for (const TraceNode& n : nodes) {
    if (std::find(n.preds.begin(), n.preds.end(), node) != n.preds.end()) {
      out.push_back(n.id);
    }
  }
  return out;
}

namespace {

bool same_bits(const Tensor<float>& a, const Tensor<float>& b) {
  return a.dims == b.dims && a.data.size() == b.data.size() &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

bool same_bits(const std::optional<Tensor<float>>& a,
               const std::optional<Tensor<float>>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same_bits(*a, *b);
}

[[noreturn]] void manifest_error(const std::string& what) {
  throw TraceError(TraceError::Kind::kManifest, "malformed trace manifest: " + what);
}

// Appends a tensor to the blob region and returns its manifest reference.
json add_blob(std::string& blobs, const Tensor<float>& t) {
  const size_t offset = blobs.size();
  append_f32_le(blobs, t.data);
  return json{{"offset", offset}, {"length", t.data.size() * 4}, {"shape", t.dims}};
}

Tensor<float> take_blob(std::string_view blobs, const json& ref) {
  if (!ref.is_object() || !ref.contains("offset") || !ref.contains("length") ||
      !ref.contains("shape")) {
    manifest_error("blob reference needs offset, length and shape");
  }
  const uint64_t offset = ref.at("offset").get<uint64_t>();
  const uint64_t length = ref.at("length").get<uint64_t>();
  const std::vector<int64_t> shape = ref.at("shape").get<std::vector<int64_t>>();
  for (int64_t d : shape) {
    if (d < 0) manifest_error("negative extent in blob shape");
  }
  const uint64_t count = static_cast<uint64_t>(Tensor<float>::count_of(shape));
  if (length != count * 4) {
    throw TraceError(TraceError::Kind::kBlobLength,
                     "blob length mismatch: " + std::to_string(length) +
                         " bytes for shape " + dims_to_string(shape));
  }
  if (offset > blobs.size() || length > blobs.size() - offset) {
    throw TraceError(TraceError::Kind::kBlobLength,
                     "blob length mismatch: blob at offset " + std::to_string(offset) +
                         " runs past the end of the file");
  }
  return Tensor<float>(shape, decode_f32_le(blobs.data() + offset, count));
}

}  // namespace

bool bundles_identical(const TraceBundle& a, const TraceBundle& b) {
  if (a.backend_id != b.backend_id || a.model_id != b.model_id || a.loss != b.loss ||
      a.precision != b.precision || a.outcome != b.outcome ||
      a.message != b.message || a.nodes != b.nodes || a.fc.size() != b.fc.size() ||
      a.bc.size() != b.bc.size()) {
    return false;
  }
  if (!same_bits(a.lo, b.lo) || !same_bits(a.lg, b.lg)) return false;
  for (size_t i = 0; i < a.fc.size(); ++i) {
    if (!same_bits(a.fc[i], b.fc[i])) return false;
  }
  for (size_t i = 0; i < a.bc.size(); ++i) {
    if (a.bc[i].size() != b.bc[i].size()) return false;
    for (size_t k = 0; k < a.bc[i].size(); ++k) {
      if (!same_bits(a.bc[i][k], b.bc[i][k])) return false;
    }
  }
  return true;
}

std::string encode_trace(const TraceBundle& bundle) {
  std::string blobs;
  json nodes = json::array();
  for (size_t i = 0; i < bundle.nodes.size(); ++i) {
    const TraceNode& n = bundle.nodes[i];
    json node{{"id", n.id}, {"kind", n.kind}, {"preds", n.preds}};
    node["fc"] = i < bundle.fc.size() && bundle.fc[i] ? add_blob(blobs, *bundle.fc[i])
                                                      : json(nullptr);
    if (i < bundle.bc.size() && !bundle.bc[i].empty()) {
      json refs = json::array();
      for (const Tensor<float>& g : bundle.bc[i]) refs.push_back(add_blob(blobs, g));
      node["bc"] = refs;
    } else {
      node["bc"] = nullptr;
    }
    nodes.push_back(node);
  }
  json manifest{{"format", "archfuzz-trace"},
                {"version", kTraceFormatVersion},
                {"backend_id", bundle.backend_id},
                {"model_id", bundle.model_id},
                {"loss", bundle.loss},
                {"precision", bundle.precision},
                {"outcome", outcome_name(bundle.outcome)},
                {"message", bundle.message},
                {"nodes", nodes},
                {"lo", bundle.lo ? add_blob(blobs, *bundle.lo) : json(nullptr)},
                {"lg", bundle.lg ? add_blob(blobs, *bundle.lg) : json(nullptr)},
                {"blob_bytes", blobs.size()}};
  // Invalid UTF-8 in crash messages is replaced rather than rejected.
  const std::string text = manifest.dump(-1, ' ', false, json::error_handler_t::replace);
  std::string out(kTraceMagic, 4);
  append_u32_le(out, kTraceFormatVersion);
  append_u64_le(out, text.size());
  out += text;
  out += blobs;
  return out;
}

TraceBundle decode_trace(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kTraceMagic, 4) != 0) {
    throw TraceError(TraceError::Kind::kManifest, "not a trace file (bad magic)");
  }
  const uint32_t version = static_cast<uint32_t>(decode_uint_le(bytes.data() + 4, 4));
  if (version != kTraceFormatVersion) {
    throw TraceError(TraceError::Kind::kVersion,
                     "unsupported trace version " + std::to_string(version));
  }
  const uint64_t manifest_len = decode_uint_le(bytes.data() + 8, 8);
  if (manifest_len > bytes.size() - 16) {
    throw TraceError(TraceError::Kind::kManifest, "manifest length exceeds file size");
  }
  const std::string_view blobs = bytes.substr(16 + manifest_len);
  json m;
  try {
    m = json::parse(bytes.substr(16, manifest_len));
  } catch (const json::exception& e) {
    manifest_error(e.what());
  }
  TraceBundle b;
  try {
    if (m.at("format") != "archfuzz-trace") manifest_error("wrong format tag");
    if (m.at("version").get<uint32_t>() != version) {
      throw TraceError(TraceError::Kind::kVersion, "manifest and header versions differ");
    }
    if (m.at("blob_bytes").get<uint64_t>() != blobs.size()) {
      throw TraceError(TraceError::Kind::kBlobLength,
                       "blob length mismatch: manifest declares " +
                           m.at("blob_bytes").dump() + " blob bytes, file holds " +
                           std::to_string(blobs.size()));
    }
    b.backend_id = m.at("backend_id").get<std::string>();
    b.model_id = m.at("model_id").get<std::string>();
    b.loss = m.at("loss").get<std::string>();
    b.precision = m.at("precision").get<std::string>();
    b.outcome = parse_outcome(m.at("outcome").get<std::string>());
    b.message = m.at("message").get<std::string>();
    for (const json& n : m.at("nodes")) {
      b.nodes.push_back({n.at("id").get<int>(), n.at("kind").get<std::string>(),
                         n.at("preds").get<std::vector<int>>()});
      const json& fc = n.at("fc");
      b.fc.push_back(fc.is_null() ? std::nullopt
                                  : std::optional<Tensor<float>>(take_blob(blobs, fc)));
      std::vector<Tensor<float>> grads;
      if (!n.at("bc").is_null()) {
        for (const json& ref : n.at("bc")) grads.push_back(take_blob(blobs, ref));
      }
      b.bc.push_back(std::move(grads));
    }
    for (size_t i = 0; i < b.nodes.size(); ++i) {
      if (b.nodes[i].id != static_cast<int>(i)) manifest_error("node ids must be dense");
    }
    if (!m.at("lo").is_null()) b.lo = take_blob(blobs, m.at("lo"));
    if (!m.at("lg").is_null()) b.lg = take_blob(blobs, m.at("lg"));
  } catch (const json::exception& e) {
    manifest_error(e.what());
  } catch (const TraceError&) {
    throw;
  } catch (const Error& e) {
    manifest_error(e.what());
  }
  return b;
}

void write_trace(const TraceBundle& bundle, const std::filesystem::path& path) {
  try {
    write_file_atomic(path, encode_trace(bundle));
  } catch (const IoError& e) {
    throw TraceError(TraceError::Kind::kIo, e.what());
  }
}

TraceBundle read_trace(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const IoError& e) {
    throw TraceError(TraceError::Kind::kIo, e.what());
  }
  return decode_trace(bytes);
}

}  // namespace archfuzz
