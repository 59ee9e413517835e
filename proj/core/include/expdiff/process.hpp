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

#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "expdiff/backbone.hpp"
#include "expdiff/image.hpp"
#include "expdiff/noise.hpp"
#include "expdiff/rng.hpp"

namespace expdiff {

/// Floor applied to denoiser outputs before the Poisson-KL loss and before
/// they are used as Poisson rates.
inline constexpr double kOutputFloor = 1e-8;

/// Exposure times of the progressive process. Step t = T is the captured
/// input, t = 0 is the reference exposure; lambdas strictly increase from
/// T down to 0.
class ExposureSchedule {
public:
    /// `from_input` lists lambda_T, lambda_{T-1}, ..., lambda_0. A single entry
    /// is the T = 0 case where the state stays at `input_lambda`.
    ExposureSchedule(std::vector<double> from_input, double input_lambda);

    [[nodiscard]] int steps() const { return static_cast<int>(lambdas_.size()) - 1; }
    /// lambda_t for t in [0, T].
    [[nodiscard]] double at(int t) const;
    /// Exposure of the state X_t (differs from at(t) only when T = 0).
    [[nodiscard]] double state_exposure(int t) const;
    [[nodiscard]] double lambda_ref() const { return lambdas_.back(); }
    [[nodiscard]] double input_lambda() const { return input_lambda_; }
    [[nodiscard]] const std::vector<double>& from_input() const { return lambdas_; }

private:
    std::vector<double> lambdas_;
    double input_lambda_;
};

/// Linear schedule: lambda_{T-k} = k * ratio * lambda_T / T for k = 1..T.
[[nodiscard]] ExposureSchedule linear_schedule(double lambda_input, double ratio, int steps);

enum class LossKind { l1, poisson_kl };

[[nodiscard]] std::string to_string(LossKind kind);
[[nodiscard]] LossKind loss_kind_from(const std::string& name);

struct ProcessConfig {
    int t_train = 2;
    int t_infer = 1;
    LossKind loss = LossKind::l1;
    std::vector<double> step_weights;  // empty: uniform
    bool detach_sampled_states = true;
    double sampling_gain = 1e-3;  // K used by the learned sampler at inference

    void validate() const;
    /// Weight of the k-th evaluated step (k = T - t) for a process of `steps` steps.
    [[nodiscard]] double step_weight(int k, int steps) const;
};

void to_json(nlohmann::json& j, const ProcessConfig& cfg);
void from_json(const nlohmann::json& j, ProcessConfig& cfg);

struct LossValue {
    double value = 0.0;
    Image grad;
};

/// Mean over pixels of F log(F / X) + X - F; pixels with X = 0 contribute F.
/// F must be strictly positive.
[[nodiscard]] LossValue loss_poisson_kl(const Image& f_out, const Image& x_ref);

/// Mean |F - X| with subgradient sign(F - X) / N, sign(0) = 0.
[[nodiscard]] LossValue loss_l1(const Image& f_out, const Image& x_ref);

[[nodiscard]] LossValue evaluate_loss(LossKind kind, const Image& f_out, const Image& x_ref);

/// One step of the learned exposure process: X_{t-1} = X_t + K * Poisson(dX / K),
/// dX = (lambda_prev - lambda_t) * f_out / lambda_ref. f_out must be >= 0.
[[nodiscard]] Image sample_step_p(const Image& x_t, const Image& f_out, double lambda_t, double lambda_prev,
                                  double lambda_ref, double gain, Rng& rng);

struct StepRecord {
    int t = 0;
    double lambda = 0.0;
    Image x_t;
    Image x_hat_ref;
    std::optional<double> loss;
};

struct StepTrace {
    std::vector<StepRecord> steps;
};

void to_json(nlohmann::json& j, const StepTrace& trace);

struct TrainResult {
    double total_loss = 0.0;
    std::vector<double> param_grads;
    StepTrace trace;
};

/// Progressive training on one pair: the denoiser sees X_T and then its own
/// sampled states X_{T-1}, ..., X_0, accumulating the weighted per-step loss.
/// Sampled states are constants for differentiation.
[[nodiscard]] TrainResult train_on_pair(const PairSample& pair, const ExposureSchedule& schedule,
                                        const DenoiserHandle& backbone, const ProcessConfig& cfg, Rng& rng);

/// Single-pass objective: loss(F(amplified X_T), X_ref).
[[nodiscard]] TrainResult train_feedforward_baseline(const PairSample& pair, const DenoiserHandle& backbone,
                                                     const ProcessConfig& cfg, Rng& rng);

struct InferResult {
    Image output;
    StepTrace trace;
};

/// Progressive inference with cfg.t_infer sampling steps plus the final
/// denoising pass on X_0. Returns clip01(F(X_0)).
[[nodiscard]] InferResult infer(const Image& x_input, const ExposureMeta& meta, double ratio,
                                const DenoiserHandle& backbone, const ProcessConfig& cfg, Rng& rng);

}  // namespace expdiff
