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
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "expdiff/data.hpp"
#include "expdiff/noise.hpp"
#include "expdiff/training.hpp"

namespace expdiff::cli {

/// Schema violation in a run config; maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PathsSection {
    std::filesystem::path manifest;       // synth output dir / training manifest
    std::filesystem::path test_manifest;  // eval and ablate input
    std::filesystem::path weights;        // train output, enhance/eval input
    std::filesystem::path out_dir;        // logs and reports
};

struct DataSection {
    SceneSpec scene;
    int count = 40;
    std::vector<double> ratios{100.0, 250.0, 300.0};
    int test_count = 0;  // > 0: synth also writes a test set to paths.test_manifest
    std::optional<std::uint64_t> test_seed;
    std::optional<double> test_highlight_fraction;
};

struct InferSection {
    int steps = 1;
    double ratio = 0.0;  // 0: take the ratio from the input file
    std::uint64_t seed = 0;
    double gain = 0.0;   // 0: use the gain recorded with the weights
};

struct EvalSection {
    std::vector<int> steps_list{0, 1, 2, 3};
    double threshold = 0.95;
    std::uint64_t seed = 0;
    std::vector<double> ratios;
};

struct AblateSection {
    std::filesystem::path weights_arl;
    std::filesystem::path weights_noarl;
    int steps = 3;
};

struct RunConfig {
    PathsSection paths;
    DataSection data;
    NoiseModel noise;
    TrainOptions train;
    InferSection infer;
    EvalSection eval;
    AblateSection ablate;
    nlohmann::json raw;  // validated document, used for digests
};

/// Parses and validates a TOML run config. Relative paths are resolved
/// against the config file's directory. Unknown sections or keys, wrong
/// types and out-of-range values raise ConfigError.
[[nodiscard]] RunConfig load_run_config(const std::filesystem::path& path);

[[nodiscard]] RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);

/// Stable 64-bit FNV-1a digest (hex) of the training-relevant config.
[[nodiscard]] std::string training_digest(const RunConfig& cfg);

}  // namespace expdiff::cli
