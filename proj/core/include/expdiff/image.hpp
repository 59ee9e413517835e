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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace expdiff {

/// Channel-major raster of doubles. Values are normalized digital numbers:
/// 1.0 is the white level at the reference exposure. Mono images have one
/// channel; Bayer data is carried as four packed RGGB planes at half
/// resolution.
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Image() = default;
    Image(int c, int h, int w, double fill = 0.0);

    [[nodiscard]] std::size_t size() const { return data.size(); }
    [[nodiscard]] std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
    [[nodiscard]] bool empty() const { return data.empty(); }

    [[nodiscard]] double& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    [[nodiscard]] const double& at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }

    [[nodiscard]] std::span<double> plane(int c) {
        return {data.data() + c * plane_size(), plane_size()};
    }
    [[nodiscard]] std::span<const double> plane(int c) const {
        return {data.data() + c * plane_size(), plane_size()};
    }

    [[nodiscard]] bool same_shape(const Image& other) const {
        return channels == other.channels && height == other.height && width == other.width;
    }

    [[nodiscard]] std::string shape_string() const;

    bool operator==(const Image&) const = default;
};

/// Exposure time and amplification ratio (lambda_ref / lambda) of a capture.
struct ExposureMeta {
    double lambda = 1.0;
    double ratio = 1.0;

    /// Throws std::invalid_argument unless lambda > 0 and ratio >= 1.
    void validate() const;

    bool operator==(const ExposureMeta&) const = default;
};

/// Throws std::invalid_argument naming `what` if the shapes differ.
void require_same_shape(const Image& a, const Image& b, const char* what);

/// Throws std::domain_error naming the first non-finite index.
void require_finite(const Image& img, const char* what);

/// Clamp every value to [0, 1]. Non-finite input is an error.
[[nodiscard]] Image clip01(const Image& img);

/// Scale brightness from exposure `lambda_from` to `lambda_to`. No clipping.
[[nodiscard]] Image amplify(const Image& img, double lambda_from, double lambda_to);

/// Crop a window of size (height, width) at (top, left) from every channel.
[[nodiscard]] Image crop(const Image& img, int top, int left, int height, int width);

}  // namespace expdiff
