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

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "expdiff/image.hpp"
#include "expdiff/rng.hpp"

namespace expdiff::testing {

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double m4 = 0.0;        // fourth central moment
    std::size_t n = 0;
};

inline Moments moments(const std::vector<double>& v) {
    Moments m;
    m.n = v.size();
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(m.n);
    double s2 = 0.0;
    double s4 = 0.0;
    for (double x : v) {
        const double d = x - m.mean;
        s2 += d * d;
        s4 += d * d * d * d;
    }
    m.variance = s2 / static_cast<double>(m.n - 1);
    m.m4 = s4 / static_cast<double>(m.n);
    return m;
}

inline Moments moments(const Image& img) { return moments(img.data); }

// Standard error of the sample mean and of the sample variance.
inline double se_mean(const Moments& m) { return std::sqrt(m.variance / static_cast<double>(m.n)); }
inline double se_variance(const Moments& m) {
    const double v = m.variance;
    return std::sqrt(std::max(m.m4 - v * v, 0.0) / static_cast<double>(m.n));
}

inline Image random_image(int c, int h, int w, double lo, double hi, std::uint64_t seed) {
    Rng rng(seed, 99);
    Image img(c, h, w);
    for (auto& v : img.data) v = lo + (hi - lo) * rng.uniform();
    return img;
}

// Fresh per-process scratch directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& name)
        : path_(std::filesystem::temp_directory_path() / ("expdiff_test_" + name + "_" + std::to_string(::getpid()))) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace expdiff::testing
