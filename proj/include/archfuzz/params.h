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

#ifndef ARCHFUZZ_PARAMS_H_
#define ARCHFUZZ_PARAMS_H_

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace archfuzz {

using ParamValue =
    std::variant<int64_t, double, std::string, std::vector<int64_t>>;

// Layer hyperparameters by name. std::map keeps serialization order stable.
using Params = std::map<std::string, ParamValue>;

int64_t param_int(const Params& p, const std::string& name);
double param_double(const Params& p, const std::string& name);
const std::string& param_string(const Params& p, const std::string& name);
const std::vector<int64_t>& param_ints(const Params& p,
                                       const std::string& name);

int64_t param_int_or(const Params& p, const std::string& name,
                     int64_t fallback);

std::string params_to_string(const Params& p);

}  // namespace archfuzz

#endif  // ARCHFUZZ_PARAMS_H_
