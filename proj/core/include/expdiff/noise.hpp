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
#include <nlohmann/json_fwd.hpp>

#include "expdiff/image.hpp"
#include "expdiff/rng.hpp"

namespace expdiff {

enum class NoiseKind { pg, eld_like };

/// Raw sensor noise: shot noise scaled by the system gain plus
/// signal-independent readout noise. Gains and sigmas are in normalized
/// digital-number units of the un-amplified capture.
struct NoiseModel {
    NoiseKind kind = NoiseKind::pg;
    double gain = 1e-3;        // K, DN per photoelectron
    double sigma_read = 0.0;   // per-pixel Gaussian std
    double sigma_row = 0.0;    // eld_like only: per-row Gaussian std
    double quant_step = 0.0;   // eld_like only: 0 disables

    void validate() const;

    bool operator==(const NoiseModel&) const = default;
};

void to_json(nlohmann::json& j, const NoiseModel& m);
void from_json(const nlohmann::json& j, NoiseModel& m);

/// Clean reference plus its simulated short exposure.
struct PairSample {
    Image x_ref;
    Image x_noisy;  // un-amplified, at meta_noisy.lambda
    ExposureMeta meta_ref;
    ExposureMeta meta_noisy;
    NoiseModel noise;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Simulate a capture at exposure lambda_t of the clean reference x_ref
/// (exposed at lambda_ref). Shot noise, then readout noise; never clipped.
[[nodiscard]] Image synthesize_lowlight(const Image& x_ref, double lambda_ref, double lambda_t, const NoiseModel& model,
                                        Rng& rng);

/// Ground-truth exposure increment: photons arriving between lambda_t and
/// lambda_prev added to x_t. Pure shot noise, no readout term.
[[nodiscard]] Image sample_increment_q(const Image& x_t, const Image& x_ref, double lambda_t, double lambda_prev,
                                       double lambda_ref, const NoiseModel& model, Rng& rng);

/// Subtract an externally captured dark/bias frame (same shape).
[[nodiscard]] Image subtract_dark_frame(const Image& img, const Image& bias);

}  // namespace expdiff
