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

#include "expdiff/process.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <stdexcept>

namespace expdiff {

namespace {

double image_mean(const Image& img) {
    if (img.empty()) return 0.0;
    return std::accumulate(img.data.begin(), img.data.end(), 0.0) / static_cast<double>(img.size());
}

Image floored(const Image& img) {
    Image out = img;
    for (double& v : out.data) v = std::max(v, kOutputFloor);
    return out;
}

void check_schedule_matches(const PairSample& pair, const ExposureSchedule& schedule) {
    const auto close = [](double a, double b) { return std::fabs(a - b) <= 1e-9 * std::max(std::fabs(a), std::fabs(b)); };
    if (!close(schedule.input_lambda(), pair.meta_noisy.lambda) || !close(schedule.lambda_ref(), pair.meta_ref.lambda)) {
        throw std::invalid_argument("train_on_pair: schedule does not match the pair's exposures");
    }
}

// Loss at one evaluated step and its backward pass into `grads`.
double step_loss(const DenoiserHandle& backbone, const DenoiserHandle::Evaluation& ev, const Image& x_ref,
                 LossKind kind, double weight, std::vector<double>& grads) {
    LossValue loss;
    if (kind == LossKind::poisson_kl) {
        loss = loss_poisson_kl(floored(ev.f), x_ref);
        // The floor is flat below kOutputFloor.
        for (std::size_t i = 0; i < loss.grad.size(); ++i) {
            if (!(ev.f.data[i] > kOutputFloor)) loss.grad.data[i] = 0.0;
        }
    } else {
        loss = loss_l1(ev.f, x_ref);
    }
    if (weight != 0.0 && backbone.trainable()) {
        for (double& g : loss.grad.data) g *= weight;
        backbone.accumulate_backward(ev, loss.grad, grads);
    }
    return loss.value;
}

}  // namespace

ExposureSchedule::ExposureSchedule(std::vector<double> from_input, double input_lambda)
    : lambdas_(std::move(from_input)), input_lambda_(input_lambda) {
    if (lambdas_.empty()) throw std::invalid_argument("schedule: empty");
    if (!(input_lambda_ > 0.0)) throw std::invalid_argument("schedule: input exposure must be positive");
    if (lambdas_.size() > 1 && lambdas_.front() != input_lambda_) {
        throw std::invalid_argument("schedule: first entry must equal the input exposure");
    }
    for (std::size_t i = 1; i < lambdas_.size(); ++i) {
        if (!(lambdas_[i] > lambdas_[i - 1])) {
            throw std::invalid_argument("schedule: exposures must strictly increase toward the reference");
        }
    }
    if (!(lambdas_.back() >= input_lambda_)) throw std::invalid_argument("schedule: reference shorter than input");
}

double ExposureSchedule::at(int t) const {
    if (t < 0 || t > steps()) throw std::out_of_range("schedule: step index out of range");
    return lambdas_[static_cast<std::size_t>(steps() - t)];
}

double ExposureSchedule::state_exposure(int t) const { return steps() == 0 ? input_lambda_ : at(t); }

ExposureSchedule linear_schedule(double lambda_input, double ratio, int steps) {
    if (steps < 0) throw std::invalid_argument("linear_schedule: step count must be >= 0");
    if (!(ratio >= 1.0)) throw std::invalid_argument("linear_schedule: ratio must be >= 1");
    if (!(lambda_input > 0.0)) throw std::invalid_argument("linear_schedule: input exposure must be positive");
    if (steps == 0) return ExposureSchedule({ratio * lambda_input}, lambda_input);
    std::vector<double> lambdas{lambda_input};
    for (int k = 1; k <= steps; ++k) {
        lambdas.push_back(static_cast<double>(k) * ratio / static_cast<double>(steps) * lambda_input);
    }
    return ExposureSchedule(std::move(lambdas), lambda_input);
}

std::string to_string(LossKind kind) { return kind == LossKind::l1 ? "l1" : "poisson_kl"; }

LossKind loss_kind_from(const std::string& name) {
    if (name == "l1") return LossKind::l1;
    if (name == "poisson_kl") return LossKind::poisson_kl;
    throw std::invalid_argument("unknown loss kind '" + name + "'");
}

void ProcessConfig::validate() const {
    if (t_train < 0 || t_infer < 0) throw std::invalid_argument("process config: step counts must be >= 0");
    if (!detach_sampled_states) {
        throw std::invalid_argument("process config: gradients through Poisson sampling are undefined; "
                                    "detach_sampled_states must be true");
    }
    if (!step_weights.empty()) {
        bool any_positive = false;
        for (double w : step_weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("process config: weights must be >= 0");
            any_positive = any_positive || w > 0.0;
        }
        if (!any_positive) throw std::invalid_argument("process config: at least one step weight must be positive");
    }
    if (!(sampling_gain > 0.0)) throw std::invalid_argument("process config: sampling gain must be > 0");
}

double ProcessConfig::step_weight(int k, int steps) const {
    if (step_weights.empty()) return 1.0;
    if (static_cast<int>(step_weights.size()) != steps + 1) {
        throw std::invalid_argument("process config: expected " + std::to_string(steps + 1) + " step weights, got " +
                                    std::to_string(step_weights.size()));
    }
    return step_weights[static_cast<std::size_t>(k)];
}

void to_json(nlohmann::json& j, const ProcessConfig& cfg) {
    j = {{"T_train", cfg.t_train},
         {"T_infer", cfg.t_infer},
         {"loss_kind", to_string(cfg.loss)},
         {"step_loss_weights", cfg.step_weights},
         {"detach_sampled_states", cfg.detach_sampled_states},
         {"sampling_gain", cfg.sampling_gain}};
}

void from_json(const nlohmann::json& j, ProcessConfig& cfg) {
    cfg.t_train = j.value("T_train", 2);
    cfg.t_infer = j.value("T_infer", 1);
    cfg.loss = loss_kind_from(j.value("loss_kind", std::string("l1")));
    cfg.step_weights = j.value("step_loss_weights", std::vector<double>{});
    cfg.detach_sampled_states = j.value("detach_sampled_states", true);
    cfg.sampling_gain = j.value("sampling_gain", 1e-3);
    cfg.validate();
}

LossValue loss_poisson_kl(const Image& f_out, const Image& x_ref) {
    require_same_shape(f_out, x_ref, "loss_poisson_kl");
    const double n = static_cast<double>(f_out.size());
    LossValue out{0.0, Image(f_out.channels, f_out.height, f_out.width)};
    double sum = 0.0;
    for (std::size_t i = 0; i < f_out.size(); ++i) {
        const double f = f_out.data[i];
        const double x = x_ref.data[i];
        if (!(f > 0.0)) {
            throw std::domain_error("loss_poisson_kl: output must be > 0 at index " + std::to_string(i) +
                                    " (floor it first)");
        }
        if (x > 0.0) {
            const double log_ratio = std::log(f / x);
            sum += f * log_ratio + x - f;
            out.grad.data[i] = log_ratio / n;
        } else {
            sum += f;
            out.grad.data[i] = 1.0 / n;
        }
    }
    out.value = sum / n;
    return out;
}

LossValue loss_l1(const Image& f_out, const Image& x_ref) {
    require_same_shape(f_out, x_ref, "loss_l1");
    const double n = static_cast<double>(f_out.size());
    LossValue out{0.0, Image(f_out.channels, f_out.height, f_out.width)};
    double sum = 0.0;
    for (std::size_t i = 0; i < f_out.size(); ++i) {
        const double d = f_out.data[i] - x_ref.data[i];
        sum += std::fabs(d);
        out.grad.data[i] = d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0);
    }
    out.value = sum / n;
    return out;
}

LossValue evaluate_loss(LossKind kind, const Image& f_out, const Image& x_ref) {
    return kind == LossKind::l1 ? loss_l1(f_out, x_ref) : loss_poisson_kl(f_out, x_ref);
}

Image sample_step_p(const Image& x_t, const Image& f_out, double lambda_t, double lambda_prev, double lambda_ref,
                    double gain, Rng& rng) {
    require_same_shape(x_t, f_out, "sample_step_p");
    if (!(lambda_prev > lambda_t)) throw std::invalid_argument("sample_step_p: need lambda_prev > lambda_t");
    if (!(gain > 0.0) || !(lambda_ref > 0.0)) throw std::invalid_argument("sample_step_p: gain and lambda_ref must be > 0");
    const double scale = (lambda_prev - lambda_t) / lambda_ref;
    Image rate = f_out;
    for (std::size_t i = 0; i < rate.size(); ++i) {
        const double dx = scale * f_out.data[i];
        if (!(dx >= 0.0) || !std::isfinite(dx)) {
            throw std::domain_error("sample_step_p: negative or non-finite increment at index " + std::to_string(i) +
                                    "; clip the denoiser output to [0,1] first");
        }
        rate.data[i] = dx / gain;  // photon counts
    }
    const Image counts = poisson_sample(rng, rate);
    Image out = x_t;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += gain * counts.data[i];
    return out;
}

void to_json(nlohmann::json& j, const StepTrace& trace) {
    j = nlohmann::json::array();
    for (const auto& s : trace.steps) {
        nlohmann::json row = {{"t", s.t},
                              {"lambda", s.lambda},
                              {"x_t_mean", image_mean(s.x_t)},
                              {"x_hat_ref_mean", image_mean(s.x_hat_ref)}};
        row["loss"] = s.loss ? nlohmann::json(*s.loss) : nlohmann::json(nullptr);
        j.push_back(std::move(row));
    }
}

TrainResult train_on_pair(const PairSample& pair, const ExposureSchedule& schedule, const DenoiserHandle& backbone,
                          const ProcessConfig& cfg, Rng& rng) {
    cfg.validate();
    require_same_shape(pair.x_ref, pair.x_noisy, "train_on_pair");
    check_schedule_matches(pair, schedule);

    const int steps = schedule.steps();
    const double lambda_ref = pair.meta_ref.lambda;
    TrainResult result;
    result.param_grads.assign(backbone.param_count(), 0.0);

    Image x = pair.x_noisy;
    for (int t = steps; t >= 0; --t) {
        const double lambda_t = schedule.state_exposure(t);
        const auto ev = backbone.evaluate(x, lambda_t, lambda_ref);
        const double weight = cfg.step_weight(steps - t, steps);
        const double loss = step_loss(backbone, ev, pair.x_ref, cfg.loss, weight, result.param_grads);
        if (!std::isfinite(loss)) {
            throw std::runtime_error("train_on_pair: non-finite loss at step t=" + std::to_string(t));
        }
        result.total_loss += weight * loss;
        result.trace.steps.push_back({t, lambda_t, x, ev.f, loss});
        if (t > 0) {
            x = sample_step_p(x, floored(ev.f), lambda_t, schedule.at(t - 1), lambda_ref, pair.noise.gain, rng);
        }
    }
    return result;
}

TrainResult train_feedforward_baseline(const PairSample& pair, const DenoiserHandle& backbone, const ProcessConfig& cfg,
                                       Rng& /*rng*/) {
    cfg.validate();
    require_same_shape(pair.x_ref, pair.x_noisy, "train_feedforward_baseline");
    TrainResult result;
    result.param_grads.assign(backbone.param_count(), 0.0);
    const auto ev = backbone.evaluate(pair.x_noisy, pair.meta_noisy.lambda, pair.meta_ref.lambda);
    const double weight = cfg.step_weight(0, 0);
    const double loss = step_loss(backbone, ev, pair.x_ref, cfg.loss, weight, result.param_grads);
    if (!std::isfinite(loss)) throw std::runtime_error("train_feedforward_baseline: non-finite loss");
    result.total_loss = weight * loss;
    result.trace.steps.push_back({0, pair.meta_noisy.lambda, pair.x_noisy, ev.f, loss});
    return result;
}

InferResult infer(const Image& x_input, const ExposureMeta& meta, double ratio, const DenoiserHandle& backbone,
                  const ProcessConfig& cfg, Rng& rng) {
    cfg.validate();
    if (!(ratio >= 1.0)) throw std::invalid_argument("infer: ratio must be >= 1");
    const auto schedule = linear_schedule(meta.lambda, ratio, cfg.t_infer);
    const double lambda_ref = schedule.lambda_ref();

    InferResult result;
    Image x = x_input;
    for (int t = schedule.steps(); t >= 1; --t) {
        const double lambda_t = schedule.state_exposure(t);
        const auto ev = backbone.evaluate(x, lambda_t, lambda_ref);
        result.trace.steps.push_back({t, lambda_t, x, ev.f, std::nullopt});
        x = sample_step_p(x, floored(ev.f), lambda_t, schedule.at(t - 1), lambda_ref, cfg.sampling_gain, rng);
    }
    const double lambda_0 = schedule.state_exposure(0);
    const auto final_ev = backbone.evaluate(x, lambda_0, lambda_ref);
    result.output = clip01(final_ev.f);
    result.trace.steps.push_back({0, lambda_0, x, result.output, std::nullopt});
    return result;
}

}  // namespace expdiff
