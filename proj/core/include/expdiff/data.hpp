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
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "expdiff/image.hpp"
#include "expdiff/noise.hpp"
#include "expdiff/rng.hpp"

namespace expdiff {

/// Synthetic clean scene recipe: a weighted mix of smooth gradients,
/// anti-aliased shapes and band-limited texture, plus optional
/// near-saturated highlight blobs.
struct SceneSpec {
    int channels = 1;
    int height = 128;
    int width = 128;
    double weight_smooth = 0.3;
    double weight_shapes = 0.4;
    double weight_texture = 0.3;
    double highlight_fraction = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);

/// Pixels at or above this value count toward the highlight quota.
inline constexpr double kHighlightLevel = 0.98;

[[nodiscard]] Image gen_scene(const SceneSpec& spec, Rng& rng);

struct ManifestItem {
    int id = 0;
    int scene = 0;
    std::string clean;  // relative to the manifest directory
    std::string noisy;
    double ratio = 1.0;
    double lambda_input = 1.0;
    double lambda_ref = 1.0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

struct DatasetManifest {
    int version = 1;
    NoiseModel noise;
    std::vector<double> ratios;
    SceneSpec scene;
    std::vector<ManifestItem> items;
    std::filesystem::path root;  // directory holding manifest.json; not serialized
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

/// Reference exposure used for all synthetic data.
inline constexpr double kReferenceExposure = 1.0;

/// Generates `count` scenes and, for each ratio, a simulated capture at
/// lambda_ref / ratio. Writes EDI files plus manifest.json into out_dir.
/// Scenes are sharded over `jobs` threads with per-item random streams.
DatasetManifest build_dataset(const SceneSpec& spec, int count, const NoiseModel& noise,
                              const std::vector<double>& ratios, const std::filesystem::path& out_dir, int jobs = 1);

/// Reads manifest.json (or the given file) and checks every referenced file exists.
[[nodiscard]] DatasetManifest load_manifest(const std::filesystem::path& path);

[[nodiscard]] PairSample load_pair(const DatasetManifest& manifest, const ManifestItem& item);

/// Fresh simulated capture of a clean reference at the given ratio.
[[nodiscard]] PairSample make_pair(const Image& x_ref, const NoiseModel& noise, double ratio, Rng& rng);

/// Same random crop window applied to both images of the pair.
[[nodiscard]] PairSample patchify(const PairSample& pair, int patch, Rng& rng);

}  // namespace expdiff
