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

#include <cstdint>
#include <filesystem>
#include <optional>

namespace expdiff::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct CommandContext {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;  // overrides every seed key in the config
    int jobs = 1;
    bool quiet = false;  // suppress stderr progress logs
};

struct EnhanceArgs {
    std::filesystem::path input;
    std::filesystem::path output;
    std::optional<std::filesystem::path> pgm;
    std::optional<int> steps;
    std::optional<double> ratio;  // wins over the input's recorded ratio
};

// Each command returns an exit code and never throws: 0 success,
// 2 config/schema error, 3 runtime or numeric error.
int cmd_synth(const CommandContext& ctx);
int cmd_train(const CommandContext& ctx);
int cmd_enhance(const CommandContext& ctx, const EnhanceArgs& args);
int cmd_eval(const CommandContext& ctx);
int cmd_ablate(const CommandContext& ctx);

}  // namespace expdiff::cli
