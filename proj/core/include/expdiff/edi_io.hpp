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

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>

#include "expdiff/image.hpp"

namespace expdiff {

// EDI container layout:
//   "EDI1" | one-line JSON header terminated by '\n' | little-endian payload
// Header fields: channels, height, width, dtype ("f32" | "f64"), lambda,
// ratio, note.

enum class ContainerErrorKind { io, not_edi, unsupported_version, malformed_header, payload_mismatch };

class ContainerError : public std::runtime_error {
public:
    ContainerError(ContainerErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    [[nodiscard]] ContainerErrorKind kind() const { return kind_; }

private:
    ContainerErrorKind kind_;
};

enum class PayloadType { f32, f64 };

struct EdiFile {
    Image image;
    ExposureMeta meta;
    std::string note;
};

void write_image(const std::filesystem::path& path, const Image& img, const ExposureMeta& meta,
                 PayloadType dtype = PayloadType::f64, const std::string& note = {});

[[nodiscard]] EdiFile read_edi(const std::filesystem::path& path);

[[nodiscard]] inline std::pair<Image, ExposureMeta> read_image(const std::filesystem::path& path) {
    auto file = read_edi(path);
    return {std::move(file.image), file.meta};
}

/// 16-bit binary PGM of a mono image, values round(clip01(x) * 65535).
void write_pgm16(const std::filesystem::path& path, const Image& img);

// Little-endian helpers shared with the weights container.
void append_le_f64(std::string& out, double v);
[[nodiscard]] double load_le_f64(const char* p);

}  // namespace expdiff
