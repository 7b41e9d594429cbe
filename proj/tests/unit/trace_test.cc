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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "archfuzz/blob_io.h"
#include "archfuzz/rng.h"
#include "json.hpp"

namespace archfuzz {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

float from_bits(uint32_t bits) {
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

uint32_t to_bits(float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  return bits;
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "archfuzz_trace_test";
  fs::create_directories(dir);
  return dir / name;
}

TraceBundle three_node_bundle() {
  TraceBundle b;
  b.backend_id = "naive";
  b.model_id = "m00007";
  b.loss = "mean_squared_error";
  b.nodes = {{0, "Input", {}}, {1, "Dense", {0}}, {2, "ReLU", {1}}};
  b.fc = {Tensor<float>({1, 2}, {1.0f, -2.0f}), Tensor<float>({1, 3}, {0.5f, 0, 3}),
          Tensor<float>({1, 3}, {0.5f, 0, 3})};
  b.lo = Tensor<float>({1}, {1.25f});
  b.lg = Tensor<float>({1, 3}, {0.1f, 0.2f, 0.3f});
  b.bc = {{Tensor<float>({1, 2}, {4, 5})}, {Tensor<float>({1, 2}, {4, 5})},
          {Tensor<float>({1, 3}, {0.1f, 0, 0.3f})}};
  return b;
}

// Random tensor mixing ordinary values with every special class of float.
Tensor<float> random_tensor(Rng& rng) {
  const int rank = static_cast<int>(rng.uniform_int(0, 4));
  std::vector<int64_t> dims;
  for (int i = 0; i < rank; ++i) dims.push_back(rng.uniform_int(0, 4));
  Tensor<float> t(dims);
  for (float& v : t.data) {
    switch (rng.uniform_int(0, 7)) {
      case 0:
        v = -std::numeric_limits<float>::infinity();
        break;
      case 1:
        v = std::numeric_limits<float>::infinity();
        break;
      case 2:  // NaN with a random payload and sign
        v = from_bits(0x7fc00000u | static_cast<uint32_t>(rng.next() & 0x803fffffu));
        break;
      case 3:
        v = -0.0f;
        break;
      case 4:
        v = std::numeric_limits<float>::denorm_min() * static_cast<float>(rng.uniform_int(1, 1000));
        break;
      default:
        v = from_bits(static_cast<uint32_t>(rng.next()));
    }
  }
  return t;
}

TraceBundle random_bundle(Rng& rng) {
  static const char* kOutcomes[] = {"ok", "nan", "crash"};
  TraceBundle b;
  b.backend_id = rng.bernoulli(0.5) ? "naive" : "adapter-\xc3\xa9 \"quoted\"";
  b.model_id = "m" + std::to_string(rng.uniform_int(0, 99999));
  b.loss = "categorical_hinge";
  b.outcome = parse_outcome(kOutcomes[rng.uniform_int(0, 2)]);
  b.message = rng.bernoulli(0.3) ? "line one\nline\ttwo \\ at 0x1f" : "";
  const int n = static_cast<int>(rng.uniform_int(0, 6));
  b.fc.resize(n);
  b.bc.resize(n);
  for (int i = 0; i < n; ++i) {
    TraceNode node{i, i == 0 ? "Input" : "Add", {}};
    for (int p = 0; p < i; ++p) {
      if (p == i - 1 || rng.bernoulli(0.3)) node.preds.push_back(p);
    }
    b.nodes.push_back(node);
    if (rng.bernoulli(0.8)) b.fc[i] = random_tensor(rng);
    const size_t grads = node.preds.empty() ? 1 : node.preds.size();
    if (rng.bernoulli(0.7)) {
      for (size_t g = 0; g < grads; ++g) b.bc[i].push_back(random_tensor(rng));
    }
  }
  if (rng.bernoulli(0.8)) b.lo = random_tensor(rng);
  if (rng.bernoulli(0.8)) b.lg = random_tensor(rng);
  return b;
}

bool same_bits(const Tensor<float>& a, const Tensor<float>& b) {
  return a.dims == b.dims && a.data.size() == b.data.size() &&
         std::memcmp(a.data.data(), b.data.data(), 4 * a.data.size()) == 0;
}

TEST(TraceFormatTest, HeaderAndBlobLayout) {
  const TraceBundle b = three_node_bundle();
  const std::string bytes = encode_trace(b);
  ASSERT_GE(bytes.size(), 16u);
  EXPECT_EQ(bytes.substr(0, 4), "AFTR");
  const unsigned char* u = reinterpret_cast<const unsigned char*>(bytes.data());
  EXPECT_EQ(u[4] | u[5] << 8 | u[6] << 16 | u[7] << 24, 1);
  uint64_t manifest_len = 0;
  for (int i = 0; i < 8; ++i) manifest_len |= static_cast<uint64_t>(u[8 + i]) << (8 * i);
  const json m = json::parse(bytes.substr(16, manifest_len));
  const std::string blobs = bytes.substr(16 + manifest_len);
  EXPECT_EQ(m["format"], "archfuzz-trace");
  EXPECT_EQ(m["version"], 1);
  EXPECT_EQ(m["backend_id"], "naive");
  EXPECT_EQ(m["model_id"], "m00007");
  EXPECT_EQ(m["loss"], "mean_squared_error");
  EXPECT_EQ(m["precision"], "f32");
  EXPECT_EQ(m["outcome"], "ok");
  EXPECT_EQ(m["blob_bytes"].get<size_t>(), blobs.size());
  ASSERT_EQ(m["nodes"].size(), 3u);
  EXPECT_EQ(m["nodes"][2]["preds"], json::array({1}));

  // Decode each referenced blob by hand: little-endian binary32, row-major.
  auto blob = [&](const json& ref) {
    std::vector<float> out;
    const size_t off = ref["offset"];
    const size_t len = ref["length"];
    for (size_t i = off; i < off + len; i += 4) {
      const uint32_t bits = static_cast<unsigned char>(blobs[i]) |
                            static_cast<unsigned char>(blobs[i + 1]) << 8 |
                            static_cast<unsigned char>(blobs[i + 2]) << 16 |
                            static_cast<uint32_t>(static_cast<unsigned char>(blobs[i + 3])) << 24;
      out.push_back(from_bits(bits));
    }
    return out;
  };
  EXPECT_EQ(blob(m["nodes"][0]["fc"]), (std::vector<float>{1.0f, -2.0f}));
  EXPECT_EQ(m["nodes"][0]["fc"]["shape"], json::array({1, 2}));
  EXPECT_EQ(blob(m["nodes"][2]["bc"][0]), (std::vector<float>{0.1f, 0, 0.3f}));
  EXPECT_EQ(blob(m["lo"]), (std::vector<float>{1.25f}));
  EXPECT_EQ(blob(m["lg"]), (std::vector<float>{0.1f, 0.2f, 0.3f}));

  // 1.0f is 0x3f800000, stored low byte first.
  const size_t off = m["nodes"][0]["fc"]["offset"];
  EXPECT_EQ(blobs.substr(off, 4), std::string("\x00\x00\x80\x3f", 4));
}

TEST(TraceFormatTest, ThreeNodeRoundTrip) {
  const TraceBundle b = three_node_bundle();
  const fs::path p = temp_file("three.trace");
  write_trace(b, p);
  const TraceBundle back = read_trace(p);
  EXPECT_TRUE(bundles_identical(b, back));
  EXPECT_EQ(encode_trace(back), encode_trace(b));
  EXPECT_EQ(back.sink(), 2);
  EXPECT_EQ(back.successors(1), std::vector<int>{2});
}

TEST(TraceFormatTest, CrashBundleWithMessageOnly) {
  TraceBundle b;
  b.backend_id = "naive+debug-abort";
  b.model_id = "m00001";
  b.loss = "mean_squared_error";
  b.outcome = Outcome::kCrash;
  b.message = "killed by signal 6";
  const TraceBundle back = decode_trace(encode_trace(b));
  EXPECT_TRUE(bundles_identical(b, back));
  EXPECT_EQ(back.message, "killed by signal 6");
  EXPECT_FALSE(back.lo.has_value());
  EXPECT_EQ(back.sink(), -1);
}

TEST(TraceFormatTest, RandomBundlesRoundTripBitIdentically) {
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const TraceBundle b = random_bundle(rng);
    const std::string bytes = encode_trace(b);
    const TraceBundle back = decode_trace(bytes);
    ASSERT_TRUE(bundles_identical(b, back)) << i;
    ASSERT_EQ(encode_trace(back), bytes) << i;
    ASSERT_EQ(back.fc.size(), b.fc.size());
    for (size_t n = 0; n < b.fc.size(); ++n) {
      ASSERT_EQ(b.fc[n].has_value(), back.fc[n].has_value());
      if (b.fc[n]) ASSERT_TRUE(same_bits(*b.fc[n], *back.fc[n]));
    }
  }
}

TEST(TraceFormatTest, NanPayloadsSurvive) {
  TraceBundle b = three_node_bundle();
  const uint32_t payloads[] = {0x7fc00001u, 0xffc12345u, 0x7f800001u, 0xff800000u};
  std::vector<float> v;
  for (uint32_t p : payloads) v.push_back(from_bits(p));
  b.fc[1] = Tensor<float>({1, 4}, v);
  const TraceBundle back = decode_trace(encode_trace(b));
  for (int i = 0; i < 4; ++i) EXPECT_EQ(to_bits((*back.fc[1])[i]), payloads[i]);
  // bundles_identical is bitwise, so a different NaN payload is a difference.
  TraceBundle other = b;
  (*other.fc[1])[0] = from_bits(0x7fc00002u);
  EXPECT_FALSE(bundles_identical(b, other));
}

TEST(TraceErrorTest, DistinctKinds) {
  const std::string good = encode_trace(three_node_bundle());
  auto kind_of = [](const std::string& bytes) {
    try {
      decode_trace(bytes);
    } catch (const TraceError& e) {
      return std::make_pair(e.kind(), std::string(e.what()));
    }
    ADD_FAILURE() << "decoded corrupt bytes";
    return std::make_pair(TraceError::Kind::kIo, std::string());
  };

  auto [k1, m1] = kind_of(good.substr(0, good.size() - 3));
  EXPECT_EQ(k1, TraceError::Kind::kBlobLength);
  EXPECT_NE(m1.find("blob length mismatch"), std::string::npos) << m1;

  std::string v2 = good;
  v2[4] = 2;
  auto [k2, m2] = kind_of(v2);
  EXPECT_EQ(k2, TraceError::Kind::kVersion);
  EXPECT_NE(m2.find("version"), std::string::npos);

  std::string bad_json = good;
  bad_json[16] = '!';
  EXPECT_EQ(kind_of(bad_json).first, TraceError::Kind::kManifest);

  EXPECT_EQ(kind_of("NOPE" + good.substr(4)).first, TraceError::Kind::kManifest);
  EXPECT_EQ(kind_of("AF").first, TraceError::Kind::kManifest);

  // A blob reference whose length disagrees with its shape.
  uint64_t len = decode_uint_le(good.data() + 8, 8);
  json m = json::parse(good.substr(16, len));
  m["lg"]["shape"] = json::array({1, 4});
  std::string manifest = m.dump();
  std::string reshaped = good.substr(0, 8);
  append_u64_le(reshaped, manifest.size());
  reshaped += manifest + good.substr(16 + len);
  auto [k3, m3] = kind_of(reshaped);
  EXPECT_EQ(k3, TraceError::Kind::kBlobLength);
  EXPECT_NE(m3.find("blob length mismatch"), std::string::npos);
}

TEST(TraceErrorTest, IoErrorsCarryThePath) {
  try {
    read_trace("/nonexistent/dir/x.trace");
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_EQ(e.kind(), TraceError::Kind::kIo);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/x.trace"), std::string::npos);
  }
  const fs::path blocker = temp_file("not_a_dir");
  write_file(blocker, "x");
  try {
    write_trace(three_node_bundle(), blocker / "x.trace");
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_EQ(e.kind(), TraceError::Kind::kIo);
    EXPECT_NE(std::string(e.what()).find("not_a_dir"), std::string::npos);
  }
}

TEST(TraceFormatTest, OutcomeNames) {
  for (Outcome o : {Outcome::kOk, Outcome::kNan, Outcome::kCrash}) {
    EXPECT_EQ(parse_outcome(outcome_name(o)), o);
  }
  EXPECT_THROW(parse_outcome("fine"), Error);
}

}  // namespace
}  // namespace archfuzz
