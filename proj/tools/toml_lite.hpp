// Copyright (c) 2026 The expdiff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <string_view>

namespace expdiff::toml {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Reads the subset of TOML used by run configs: [table] headers, bare or
// quoted keys, basic/literal strings, integers, floats, booleans and
// (possibly multi-line, nested) arrays. Inline tables, dotted keys and
// dates are rejected.
nlohmann::json parse(std::string_view text);

}  // namespace expdiff::toml
