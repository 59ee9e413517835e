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

#include "expdiff/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "expdiff/rng.hpp"

namespace expdiff {

OptimState OptimState::sgd(double lr) {
    OptimState s;
    s.kind = OptimizerKind::sgd;
    s.learning_rate = lr;
    return s;
}

OptimState OptimState::adam(double lr, double beta1, double beta2, double epsilon) {
    OptimState s;
    s.kind = OptimizerKind::adam;
    s.learning_rate = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    return s;
}

void optimizer_step(OptimState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("optimizer_step: params/grads size mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw std::domain_error("optimizer_step: non-finite gradient at index " + std::to_string(i));
        }
    }
    if (state.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= state.learning_rate * grads[i];
        ++state.step_count;
        return;
    }

    if (state.first_moment.empty()) {
        state.first_moment.assign(params.size(), 0.0);
        state.second_moment.assign(params.size(), 0.0);
    }
    if (state.first_moment.size() != params.size()) {
        throw std::invalid_argument("optimizer_step: moment buffers do not match parameter count");
    }
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

FiniteDiffReport finite_diff_check(const std::function<double(std::span<const double>)>& loss,
                                   std::vector<double> params, std::span<const double> analytic,
                                   const FiniteDiffOptions& options) {
    if (analytic.size() != params.size()) throw std::invalid_argument("finite_diff_check: gradient size mismatch");
    const double base_a = loss(params);
    const double base_b = loss(params);
    if (base_a != base_b) {
        throw std::runtime_error("finite_diff_check: loss is nondeterministic (replay the random stream)");
    }

    std::vector<std::size_t> indices(params.size());
    std::iota(indices.begin(), indices.end(), 0);
    if (options.max_params > 0 && options.max_params < params.size()) {
        const std::size_t keep = std::max<std::size_t>(options.max_params, std::min<std::size_t>(64, params.size()));
        Rng rng(options.subset_seed, 0x5EEDULL);
        // Partial Fisher-Yates.
        for (std::size_t i = 0; i < keep; ++i) {
            const auto j = i + rng.below(static_cast<std::uint32_t>(params.size() - i));
            std::swap(indices[i], indices[j]);
        }
        indices.resize(keep);
        std::sort(indices.begin(), indices.end());
    }

    FiniteDiffReport report;
    for (std::size_t idx : indices) {
        const double saved = params[idx];
        params[idx] = saved + options.step;
        const double up = loss(params);
        params[idx] = saved - options.step;
        const double down = loss(params);
        params[idx] = saved;
        const double numeric = (up - down) / (2.0 * options.step);
        const double denom = std::max({std::fabs(numeric), std::fabs(analytic[idx]), options.scale_floor});
        const double rel = std::fabs(numeric - analytic[idx]) / denom;
        if (rel > report.max_rel_error || report.checked == 0) {
            report.max_rel_error = std::max(report.max_rel_error, rel);
            if (rel >= report.max_rel_error) report.worst_index = idx;
        }
        ++report.checked;
    }
    report.passed = report.max_rel_error < options.tolerance;
    return report;
}

}  // namespace expdiff
