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
#include <functional>
#include <span>
#include <vector>

namespace expdiff {

enum class OptimizerKind { sgd, adam };

struct OptimState {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::int64_t step_count = 0;

    static OptimState sgd(double lr);
    static OptimState adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
};

/// In-place SGD or bias-corrected Adam update. Moments are sized on the first call.
void optimizer_step(OptimState& state, std::span<double> params, std::span<const double> grads);

struct FiniteDiffReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    bool passed = false;
};

struct FiniteDiffOptions {
    double step = 1e-6;
    double tolerance = 1e-4;
    /// Gradients smaller than this are compared on an absolute scale.
    double scale_floor = 1e-7;
    /// Check at most this many parameters (a seeded random subset, never fewer than 64 when available).
    std::size_t max_params = 0;  // 0: all
    std::uint64_t subset_seed = 1;
};

/// Central-difference check of `analytic` against loss(params). The loss
/// must be deterministic (it is evaluated twice at the base point and any
/// difference is an error). `params` is restored on return.
[[nodiscard]] FiniteDiffReport finite_diff_check(const std::function<double(std::span<const double>)>& loss,
                                                 std::vector<double> params, std::span<const double> analytic,
                                                 const FiniteDiffOptions& options = {});

}  // namespace expdiff
