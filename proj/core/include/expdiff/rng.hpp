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
#include <optional>

#include "expdiff/image.hpp"

namespace expdiff {

/// PCG32 (XSH-RR output, 64-bit LCG state) with an explicit stream id.
///
/// All variate generation below is written in terms of next_u32 and plain
/// IEEE arithmetic, so sequences are reproducible across platforms and
/// standard library implementations. std::*_distribution is never used.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Uniform in (0, 1).
    double uniform_open();
    /// Uniform integer in [0, bound).
    std::uint32_t below(std::uint32_t bound);

    /// Standard normal (Marsaglia polar method; the spare value is cached).
    double normal();

    /// Poisson variate: inversion below rate 10, PTRS transformed rejection above.
    double poisson(double rate);

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] std::uint64_t stream() const { return stream_; }

    bool operator==(const Rng&) const = default;

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::optional<double> spare_normal_;
};

/// Independent Poisson draw per pixel. Rates must be finite and >= 0.
[[nodiscard]] Image poisson_sample(Rng& rng, const Image& rate);

/// I.i.d. normal draws of the given shape. sigma must be >= 0.
[[nodiscard]] Image gaussian_sample(Rng& rng, double mean, double sigma, int channels, int height, int width);

}  // namespace expdiff
