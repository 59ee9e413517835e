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
#include <limits>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "expdiff/backbone.hpp"
#include "expdiff/data.hpp"
#include "expdiff/image.hpp"
#include "expdiff/noise.hpp"
#include "expdiff/process.hpp"

namespace expdiff {

/// PSNR sentinel for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE); kPsnrIdentical when MSE is zero.
[[nodiscard]] double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean SSIM over the valid region of an 11x11 Gaussian window (sigma 1.5),
/// C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L = 1, averaged over channels.
[[nodiscard]] double ssim(const Image& a, const Image& b);

struct EvalItem {
    int id = 0;
    int scene = 0;
    PairSample pair;
};

struct MetricRow {
    int item = 0;
    int scene = 0;
    double ratio = 1.0;
    int steps = 0;       // sampling steps of the run
    int step_index = 0;  // 0 = first estimate, steps = final output
    bool arl = false;
    std::string loss;
    double psnr = 0.0;
    double ssim = 0.0;
    double runtime_ms = 0.0;  // wall clock of the whole run; excluded from deterministic reports
};

struct CurvePoint {
    int steps = 0;
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    std::vector<CurvePoint> curve;  // final-output means per step count
};

struct SweepOptions {
    std::vector<int> steps_list{0};
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string loss_label;
};

/// Runs inference on every item for every step count, scoring the reference
/// estimate of each step. Produces |items| * sum(steps + 1) rows ordered by
/// item, then step count, then step.
[[nodiscard]] MetricReport iteration_sweep(const std::vector<EvalItem>& items, const DenoiserHandle& backbone,
                                           const ProcessConfig& cfg, const SweepOptions& options);

[[nodiscard]] std::vector<EvalItem> load_eval_items(const DatasetManifest& manifest,
                                                    const std::vector<double>& ratio_filter = {});

void write_report_csv(const std::filesystem::path& path, const MetricReport& report);
void write_timing_csv(const std::filesystem::path& path, const MetricReport& report);
void write_curve_csv(const std::filesystem::path& path, const MetricReport& report);
[[nodiscard]] nlohmann::json report_summary(const MetricReport& report);

struct HighlightDelta {
    double mae_before = 0.0;
    double mae_after = 0.0;
    double delta = 0.0;  // after - before
    std::size_t mask_pixels = 0;
    bool empty_mask = false;
    Image delta_map;  // |after - ref| - |before - ref|
};

/// Highlight mask: pixels where clip01(mask_source) >= threshold, any channel
/// position counted independently. mask_source defaults to x_ref when empty.
[[nodiscard]] HighlightDelta highlight_error_delta(const Image& x_ref, const Image& result_before,
                                                   const Image& result_after, double threshold = 0.95,
                                                   const Image& mask_source = {});

}  // namespace expdiff
