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

#include "expdiff/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace expdiff {

namespace {

constexpr std::uint64_t kPcgMultiplier = 6364136223846793005ULL;

// Transformed rejection with squeeze (Hormann 1993), for rate >= 10.
double poisson_ptrs(Rng& rng, double lam) {
    const double slam = std::sqrt(lam);
    const double loglam = std::log(lam);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);

    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::fabs(u);
        const double k = std::floor((2.0 * a / us + b) * u + lam + 0.43);
        if (us >= 0.07 && v <= vr) return k;
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
            -lam + k * loglam - std::lgamma(k + 1.0)) {
            return k;
        }
    }
}

double poisson_inversion(Rng& rng, double lam) {
    const double u = rng.uniform();
    double p = std::exp(-lam);
    double cdf = p;
    double k = 0.0;
    // The tail beyond k = 200 has negligible mass for lam < 10.
    while (u > cdf && k < 200.0) {
        k += 1.0;
        p *= lam / k;
        cdf += p;
    }
    return k;
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
    inc_ = (stream << 1U) | 1U;
    state_ = 0;
    next_u32();
    state_ += seed;
    next_u32();
}

std::uint32_t Rng::next_u32() {
    const std::uint64_t old = state_;
    state_ = old * kPcgMultiplier + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18U) ^ old) >> 27U);
    const auto rot = static_cast<std::uint32_t>(old >> 59U);
    return (xorshifted >> rot) | (xorshifted << ((32U - rot) & 31U));
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32U) | next_u32();
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11U) * 0x1.0p-53; }

double Rng::uniform_open() {
    for (;;) {
        const double u = uniform();
        if (u > 0.0) return u;
    }
}

std::uint32_t Rng::below(std::uint32_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
    // Lemire-style rejection to avoid modulo bias.
    const std::uint32_t threshold = (0U - bound) % bound;
    for (;;) {
        const std::uint32_t r = next_u32();
        if (r >= threshold) return r % bound;
    }
}

double Rng::normal() {
    if (spare_normal_) {
        const double v = *spare_normal_;
        spare_normal_.reset();
        return v;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_normal_ = v * scale;
    return u * scale;
}

double Rng::poisson(double rate) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
        throw std::domain_error("poisson rate must be finite and >= 0");
    }
    if (rate == 0.0) return 0.0;
    if (rate < 10.0) return poisson_inversion(*this, rate);
    return poisson_ptrs(*this, rate);
}

Image poisson_sample(Rng& rng, const Image& rate) {
    for (std::size_t i = 0; i < rate.size(); ++i) {
        const double r = rate.data[i];
        if (!(r >= 0.0) || !std::isfinite(r)) {
            throw std::domain_error("poisson_sample: invalid rate at index " + std::to_string(i));
        }
    }
    Image out = rate;
    for (double& v : out.data) v = rng.poisson(v);
    return out;
}

Image gaussian_sample(Rng& rng, double mean, double sigma, int channels, int height, int width) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian_sample: sigma must be >= 0");
    Image out(channels, height, width, mean);
    if (sigma == 0.0) return out;
    for (double& v : out.data) v = mean + sigma * rng.normal();
    return out;
}

}  // namespace expdiff
