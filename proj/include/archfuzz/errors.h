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

#ifndef ARCHFUZZ_ERRORS_H_
#define ARCHFUZZ_ERRORS_H_

#include <stdexcept>
#include <string>

namespace archfuzz {

// Base class for every error the toolkit raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cycle found while ordering a graph; carries one edge on the cycle.
class CycleError : public Error {
 public:
  CycleError(int src, int dst)
      : Error("cycle detected at edge " + std::to_string(src) + "->" +
              std::to_string(dst)),
        src_(src),
        dst_(dst) {}
  int src() const { return src_; }
  int dst() const { return dst_; }

 private:
  int src_;
  int dst_;
};

class ShapeError : public Error {
 public:
  ShapeError(int node, const std::string& rule)
      : Error("node " + std::to_string(node) + ": " + rule),
        node_(node),
        rule_(rule) {}
  int node() const { return node_; }
  const std::string& rule() const { return rule_; }

 private:
  int node_;
  std::string rule_;
};

// Raised by layer assignment when a skeleton cannot be materialized; the
// generator answers by drawing a fresh skeleton.
class GenerationRetry : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace archfuzz

#endif  // ARCHFUZZ_ERRORS_H_
