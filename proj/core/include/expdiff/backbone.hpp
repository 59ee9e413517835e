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
#include <span>
#include <string>
#include <vector>

#include "expdiff/image.hpp"
#include "expdiff/rng.hpp"

namespace expdiff {

/// Raw backbone heads consumed by the adaptive residual layer.
/// x_hat: predicted reference; r_hat: predicted residual against the
/// amplified input; m: single-channel soft mask in [0, 1].
struct ArlOutput {
    Image x_hat;
    Image r_hat;
    Image m;
};

/// F = M * clip01(x_hat) + (1 - M) * clip01(amplified(x_t) + r_hat),
/// with M broadcast over channels. Output always lies in [0, 1].
[[nodiscard]] Image arl_combine(const ArlOutput& out, const Image& x_t, double lambda_t, double lambda_ref);

/// Gradients of a scalar loss with respect to x_hat, r_hat and m given
/// dLoss/dF. Clip derivatives are the indicator of the open interval (0, 1).
[[nodiscard]] ArlOutput arl_backward(const ArlOutput& out, const Image& x_t, double lambda_t, double lambda_ref,
                                     const Image& grad_f);

enum class Activation { leaky_relu, linear };

inline constexpr double kLeakySlope = 0.1;

struct LayerSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    Activation activation = Activation::leaky_relu;

    [[nodiscard]] std::size_t weight_count() const {
        return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
    }
    bool operator==(const LayerSpec&) const = default;
};

/// Weights of the small shared denoiser. All parameters live in one flat
/// array (layer by layer: weights out x in x k x k, then biases) so the
/// optimizer and the gradient checker can treat them uniformly.
class ConvNetParams {
public:
    ConvNetParams() = default;
    /// Zero-initialized parameters for the given architecture.
    ConvNetParams(std::vector<LayerSpec> layers, int image_channels, bool arl_enabled);

    /// `depth` same-padding convolutions, leaky-ReLU between them, final
    /// layer emitting 2C+1 channels with ARL or C without. He-initialized.
    static ConvNetParams make(int image_channels, bool arl_enabled, int hidden, int depth, int kernel, Rng& rng);

    [[nodiscard]] const std::vector<LayerSpec>& layers() const { return layers_; }
    [[nodiscard]] int image_channels() const { return image_channels_; }
    [[nodiscard]] bool arl_enabled() const { return arl_enabled_; }
    [[nodiscard]] int output_channels() const { return arl_enabled_ ? 2 * image_channels_ + 1 : image_channels_; }

    [[nodiscard]] std::size_t param_count() const { return values_.size(); }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    /// Mutable access invalidates every forward cache built from these params.
    [[nodiscard]] std::span<double> mutable_values();

    [[nodiscard]] std::size_t weight_offset(std::size_t layer) const { return offsets_.at(layer); }
    [[nodiscard]] std::size_t bias_offset(std::size_t layer) const {
        return offsets_.at(layer) + layers_.at(layer).weight_count();
    }

    [[nodiscard]] std::uint64_t revision() const { return revision_; }

    bool operator==(const ConvNetParams& o) const {
        return layers_ == o.layers_ && image_channels_ == o.image_channels_ && arl_enabled_ == o.arl_enabled_ &&
               values_ == o.values_;
    }

private:
    std::vector<LayerSpec> layers_;
    std::vector<std::size_t> offsets_;
    std::vector<double> values_;
    int image_channels_ = 1;
    bool arl_enabled_ = true;
    std::uint64_t revision_ = 0;
};

struct ConvNetCache {
    std::uint64_t revision = 0;
    int height = 0;
    int width = 0;
    std::vector<Image> padded_inputs;  // per layer
    std::vector<Image> preacts;        // per hidden layer, before the nonlinearity
    Image mask;                        // logistic(m logit), ARL only
};

struct ConvNetForward {
    ArlOutput out;
    ConvNetCache cache;
};

struct ConvNetBackward {
    std::vector<double> param_grads;
    Image input_grad;
};

/// x_in must already be amplified to the reference brightness.
[[nodiscard]] ConvNetForward convnet_forward(const ConvNetParams& params, const Image& x_in);

/// Exact reverse-mode gradients. `grad_out` holds dLoss/d(x_hat, r_hat, m);
/// the logistic derivative for m is applied here. Without ARL only x_hat
/// is used. Throws std::logic_error if the cache predates a parameter change.
[[nodiscard]] ConvNetBackward convnet_backward(const ConvNetParams& params, const ConvNetCache& cache,
                                               const ArlOutput& grad_out);

[[nodiscard]] ArlOutput identity_backbone(const Image& x_in);

/// Separable Gaussian blur (reflect padding); r_hat = x_hat - x_in, m = 1.
[[nodiscard]] ArlOutput gaussian_filter_backbone(const Image& x_in, double sigma);

/// Normalized 1-D Gaussian taps for radius ceil(3 sigma).
[[nodiscard]] std::vector<double> gaussian_taps(double sigma);

enum class BackboneKind { convnet, identity, gaussian_filter };

/// The denoiser F as seen by the exposure process: takes the un-amplified
/// state at lambda_t and returns the clipped reference estimate.
class DenoiserHandle {
public:
    struct Evaluation {
        Image f;
        ArlOutput raw;
        Image x_t;
        double lambda_t = 1.0;
        double lambda_ref = 1.0;
        std::optional<ConvNetCache> cache;
    };

    static DenoiserHandle convnet(ConvNetParams params);
    static DenoiserHandle identity();
    static DenoiserHandle gaussian_filter(double sigma);

    [[nodiscard]] BackboneKind kind() const { return kind_; }
    [[nodiscard]] bool trainable() const { return kind_ == BackboneKind::convnet; }
    [[nodiscard]] bool arl_enabled() const;
    [[nodiscard]] std::size_t param_count() const { return params_.param_count(); }

    [[nodiscard]] const ConvNetParams& params() const { return params_; }
    [[nodiscard]] ConvNetParams& mutable_params() { return params_; }

    [[nodiscard]] Evaluation evaluate(const Image& x_t, double lambda_t, double lambda_ref) const;

    /// Adds dLoss/dparams into `param_grads` (size param_count()).
    void accumulate_backward(const Evaluation& eval, const Image& grad_f, std::span<double> param_grads) const;

private:
    BackboneKind kind_ = BackboneKind::identity;
    ConvNetParams params_;
    double sigma_ = 1.0;
};

/// Metadata stored alongside weights in an EDW1 file.
struct WeightsInfo {
    bool baseline = false;
    std::string config_digest;
    std::string note;
    double sampling_gain = 0.0;  // K used while training; 0 if unknown
    double ratio = 0.0;          // training ratio when a single one was used
};

struct WeightsFile {
    ConvNetParams params;
    WeightsInfo info;
};

// EDW1 layout: "EDW1" | JSON header line (layers, arl_enabled, channels,
// baseline, config_digest, note, sampling_gain, ratio, count) | little-endian f64 payload.
void save_weights(const std::filesystem::path& path, const ConvNetParams& params, const WeightsInfo& info);
[[nodiscard]] WeightsFile load_weights(const std::filesystem::path& path);

}  // namespace expdiff
