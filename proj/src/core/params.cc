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

#include "archfuzz/params.h"

#include <sstream>

#include "archfuzz/errors.h"

namespace archfuzz {
namespace {

template <typename T>
const T& get(const Params& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw Error("missing parameter '" + name + "'");
  const T* v = std::get_if<T>(&it->second);
  if (v == nullptr) throw Error("parameter '" + name + "' has the wrong type");
  return *v;
}

}  // namespace

int64_t param_int(const Params& p, const std::string& name) {
  return get<int64_t>(p, name);
}

double param_double(const Params& p, const std::string& name) {
  auto it = p.find(name);
  if (it != p.end()) {
    if (const int64_t* i = std::get_if<int64_t>(&it->second)) {
      return static_cast<double>(*i);
    }
  }
  return get<double>(p, name);
}

const std::string& param_string(const Params& p, const std::string& name) {
  return get<std::string>(p, name);
}

const std::vector<int64_t>& param_ints(const Params& p,
                                       const std::string& name) {
  return get<std::vector<int64_t>>(p, name);
}

int64_t param_int_or(const Params& p, const std::string& name,
                     int64_t fallback) {
  return p.count(name) ? param_int(p, name) : fallback;
}

std::string params_to_string(const Params& p) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [name, value] : p) {
    if (!first) out << ", ";
    first = false;
    out << name << '=';
    std::visit(
        [&out](const auto& v) {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, std::vector<int64_t>>) {
            out << '[';
            for (size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
            out << ']';
          } else {
            out << v;
          }
        },
        value);
  }
  return out.str();
}

}  // namespace archfuzz
