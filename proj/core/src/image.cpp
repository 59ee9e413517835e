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

#include "expdiff/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace expdiff {

Image::Image(int c, int h, int w, double fill) : channels(c), height(h), width(w) {
    if (c <= 0 || h <= 0 || w <= 0) {
        throw std::invalid_argument("image dimensions must be positive, got " + std::to_string(c) + "x" +
                                    std::to_string(h) + "x" + std::to_string(w));
    }
    data.assign(static_cast<std::size_t>(c) * h * w, fill);
}

std::string Image::shape_string() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

void ExposureMeta::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("exposure lambda must be positive and finite");
    }
    if (!(ratio >= 1.0) || !std::isfinite(ratio)) {
        throw std::invalid_argument("exposure ratio must be >= 1");
    }
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                                    b.shape_string());
    }
}

void require_finite(const Image& img, const char* what) {
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (!std::isfinite(img.data[i])) {
            throw std::domain_error(std::string(what) + ": non-finite value at index " + std::to_string(i));
        }
    }
}

Image clip01(const Image& img) {
    require_finite(img, "clip01");
    Image out = img;
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

Image amplify(const Image& img, double lambda_from, double lambda_to) {
    if (!(lambda_from > 0.0)) {
        throw std::invalid_argument("amplify: lambda_from must be positive");
    }
    const double gain = lambda_to / lambda_from;
    Image out = img;
    for (double& v : out.data) v *= gain;
    return out;
}

Image crop(const Image& img, int top, int left, int height, int width) {
    if (top < 0 || left < 0 || height <= 0 || width <= 0 || top + height > img.height ||
        left + width > img.width) {
        throw std::out_of_range("crop window outside image " + img.shape_string());
    }
    Image out(img.channels, height, width);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < height; ++y) {
            const double* src = &img.data[(static_cast<std::size_t>(c) * img.height + top + y) * img.width + left];
            std::copy(src, src + width, &out.at(c, y, 0));
        }
    }
    return out;
}

}  // namespace expdiff
