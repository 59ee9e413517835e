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

#include "expdiff/noise.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace expdiff {

void NoiseModel::validate() const {
    if (!(gain > 0.0) || !std::isfinite(gain)) throw std::invalid_argument("noise model: K must be > 0");
    if (!(sigma_read >= 0.0)) throw std::invalid_argument("noise model: sigma_read must be >= 0");
    if (!(sigma_row >= 0.0)) throw std::invalid_argument("noise model: sigma_row must be >= 0");
    if (!(quant_step >= 0.0)) throw std::invalid_argument("noise model: quant_step must be >= 0");
}

void to_json(nlohmann::json& j, const NoiseModel& m) {
    j = nlohmann::json{{"kind", m.kind == NoiseKind::pg ? "PG" : "ELDlike"}, {"K", m.gain}, {"sigma_read", m.sigma_read}};
    if (m.kind == NoiseKind::eld_like) {
        j["sigma_row"] = m.sigma_row;
        j["quant_step"] = m.quant_step;
    }
}

void from_json(const nlohmann::json& j, NoiseModel& m) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "PG") {
        m.kind = NoiseKind::pg;
    } else if (kind == "ELDlike") {
        m.kind = NoiseKind::eld_like;
    } else {
        throw std::invalid_argument("noise model: unknown kind '" + kind + "'");
    }
    m.gain = j.at("K").get<double>();
    m.sigma_read = j.at("sigma_read").get<double>();
    m.sigma_row = j.value("sigma_row", 0.0);
    m.quant_step = j.value("quant_step", 0.0);
    m.validate();
}

void PairSample::validate() const {
    require_same_shape(x_ref, x_noisy, "pair");
    meta_ref.validate();
    meta_noisy.validate();
    if (meta_ref.lambda < meta_noisy.lambda) {
        throw std::invalid_argument("pair: reference exposure shorter than noisy exposure");
    }
    for (double v : x_ref.data) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("pair: x_ref outside [0,1]");
    }
}

Image synthesize_lowlight(const Image& x_ref, double lambda_ref, double lambda_t, const NoiseModel& model, Rng& rng) {
    model.validate();
    if (!(lambda_t > 0.0) || lambda_t > lambda_ref) {
        throw std::invalid_argument("synthesize_lowlight: need 0 < lambda_t <= lambda_ref");
    }
    const double k = model.gain;
    Image rate = x_ref;
    for (double& v : rate.data) {
        if (!(v >= 0.0)) throw std::invalid_argument("synthesize_lowlight: x_ref must be >= 0");
        v = lambda_t * v / (lambda_ref * k);
    }
    Image out = poisson_sample(rng, rate);
    for (double& v : out.data) v *= k;

    if (model.sigma_read > 0.0) {
        for (double& v : out.data) v += model.sigma_read * rng.normal();
    }
    if (model.kind == NoiseKind::eld_like) {
        if (model.sigma_row > 0.0) {
            for (int c = 0; c < out.channels; ++c) {
                for (int y = 0; y < out.height; ++y) {
                    const double row = model.sigma_row * rng.normal();
                    for (int x = 0; x < out.width; ++x) out.at(c, y, x) += row;
                }
            }
        }
        if (model.quant_step > 0.0) {
            for (double& v : out.data) v = std::round(v / model.quant_step) * model.quant_step;
        }
    }
    return out;
}

Image sample_increment_q(const Image& x_t, const Image& x_ref, double lambda_t, double lambda_prev, double lambda_ref,
                         const NoiseModel& model, Rng& rng) {
    model.validate();
    require_same_shape(x_t, x_ref, "sample_increment_q");
    if (!(lambda_prev > lambda_t)) throw std::invalid_argument("sample_increment_q: need lambda_prev > lambda_t");
    if (!(lambda_ref > 0.0)) throw std::invalid_argument("sample_increment_q: lambda_ref must be positive");
    const double k = model.gain;
    const double scale = (lambda_prev - lambda_t) / (lambda_ref * k);
    Image rate = x_ref;
    for (double& v : rate.data) {
        if (!(v >= 0.0)) throw std::invalid_argument("sample_increment_q: x_ref must be >= 0");
        v *= scale;
    }
    const Image counts = poisson_sample(rng, rate);
    Image out = x_t;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += k * counts.data[i];
    return out;
}

Image subtract_dark_frame(const Image& img, const Image& bias) {
    require_same_shape(img, bias, "subtract_dark_frame");
    Image out = img;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= bias.data[i];
    return out;
}

}  // namespace expdiff
