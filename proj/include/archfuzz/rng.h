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

#ifndef ARCHFUZZ_RNG_H_
#define ARCHFUZZ_RNG_H_

#include <cstdint>
#include <random>
#include <vector>

namespace archfuzz {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stateless counter-based draw: the same key always yields the same bits, on
// every platform. Used for weights, inputs and labels so that a ModelSpec is
// reproducible from its seed alone.
inline uint64_t keyed_bits(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t x = splitmix64(seed);
  x = splitmix64(x ^ (a * 0xd1b54a32d192ed03ULL));
  x = splitmix64(x ^ (b * 0xaef17502108ef2d9ULL));
  return splitmix64(x ^ (c * 0x9e3779b97f4a7c15ULL));
}

// Uniform in [-0.5, 0.5) with 24 bits of resolution, so exactly
// representable as a float.
inline float keyed_uniform_half(uint64_t seed, uint64_t a, uint64_t b,
                                uint64_t c) {
  const uint64_t bits = keyed_bits(seed, a, b, c) >> 40;
  return static_cast<float>(static_cast<double>(bits) / 16777216.0 - 0.5);
}

// Sequential generator for structural decisions. Distributions are written
// out by hand because the standard library's are implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  // Uniform double in [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [lo, hi], inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<int64_t>(engine_());
    const uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return lo + static_cast<int64_t>(x % range);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[uniform_int(0, static_cast<int64_t>(items.size()) - 1)];
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (int64_t i = static_cast<int64_t>(items.size()) - 1; i > 0; --i) {
      std::swap(items[i], items[uniform_int(0, i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace archfuzz

#endif  // ARCHFUZZ_RNG_H_
