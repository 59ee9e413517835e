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

#include "expdiff/edi_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

namespace expdiff {

namespace {

template <typename T>
T byteswap_if_big(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        std::reverse(buf, buf + sizeof(T));
        std::memcpy(&v, buf, sizeof(T));
    }
    return v;
}

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContainerError(ContainerErrorKind::io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void append_le_f64(std::string& out, double v) {
    const auto bits = byteswap_if_big(std::bit_cast<std::uint64_t>(v));
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.append(buf, 8);
}

double load_le_f64(const char* p) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, p, 8);
    return std::bit_cast<double>(byteswap_if_big(bits));
}

void write_image(const std::filesystem::path& path, const Image& img, const ExposureMeta& meta, PayloadType dtype,
                 const std::string& note) {
    require_finite(img, "write_image");
    nlohmann::json header = {
        {"channels", img.channels},
        {"height", img.height},
        {"width", img.width},
        {"dtype", dtype == PayloadType::f32 ? "f32" : "f64"},
        {"lambda", meta.lambda},
        {"ratio", meta.ratio},
        {"note", note},
    };
    std::string blob = "EDI1";
    blob += header.dump();
    blob += '\n';
    blob.reserve(blob.size() + img.size() * 8);
    for (double v : img.data) {
        if (dtype == PayloadType::f64) {
            append_le_f64(blob, v);
        } else {
            const auto bits = byteswap_if_big(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
            char buf[4];
            std::memcpy(buf, &bits, 4);
            blob.append(buf, 4);
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ContainerError(ContainerErrorKind::io, "cannot write " + path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw ContainerError(ContainerErrorKind::io, "short write to " + path.string());
}

EdiFile read_edi(const std::filesystem::path& path) {
    const std::string blob = read_all(path);
    if (blob.size() < 4 || blob.compare(0, 3, "EDI") != 0) {
        throw ContainerError(ContainerErrorKind::not_edi, path.string() + ": not an EDI container");
    }
    if (blob[3] != '1') {
        throw ContainerError(ContainerErrorKind::unsupported_version,
                             path.string() + ": unsupported EDI version '" + blob.substr(3, 1) + "'");
    }
    const auto eol = blob.find('\n', 4);
    if (eol == std::string::npos) {
        throw ContainerError(ContainerErrorKind::malformed_header, path.string() + ": header not terminated");
    }

    EdiFile file;
    std::size_t count = 0;
    std::size_t elem = 8;
    try {
        const auto header = nlohmann::json::parse(blob.begin() + 4, blob.begin() + static_cast<std::ptrdiff_t>(eol));
        const int c = header.at("channels").get<int>();
        const int h = header.at("height").get<int>();
        const int w = header.at("width").get<int>();
        const auto dtype = header.at("dtype").get<std::string>();
        if (dtype == "f32") {
            elem = 4;
        } else if (dtype != "f64") {
            throw ContainerError(ContainerErrorKind::malformed_header, path.string() + ": unknown dtype " + dtype);
        }
        file.meta.lambda = header.at("lambda").get<double>();
        file.meta.ratio = header.at("ratio").get<double>();
        file.note = header.value("note", std::string{});
        file.image = Image(c, h, w);
        count = file.image.size();
    } catch (const ContainerError&) {
        throw;
    } catch (const std::exception& e) {
        throw ContainerError(ContainerErrorKind::malformed_header,
                             path.string() + ": malformed header: " + e.what());
    }

    const std::size_t payload = blob.size() - eol - 1;
    if (payload != count * elem) {
        throw ContainerError(ContainerErrorKind::payload_mismatch,
                             path.string() + ": payload length mismatch (expected " + std::to_string(count * elem) +
                                 " bytes, found " + std::to_string(payload) + ")");
    }
    const char* p = blob.data() + eol + 1;
    for (std::size_t i = 0; i < count; ++i) {
        if (elem == 8) {
            file.image.data[i] = load_le_f64(p + 8 * i);
        } else {
            std::uint32_t bits = 0;
            std::memcpy(&bits, p + 4 * i, 4);
            file.image.data[i] = std::bit_cast<float>(byteswap_if_big(bits));
        }
    }
    return file;
}

void write_pgm16(const std::filesystem::path& path, const Image& img) {
    if (img.channels != 1) throw std::invalid_argument("write_pgm16: mono images only, got " + img.shape_string());
    const Image clipped = clip01(img);
    std::string blob = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n65535\n";
    for (double v : clipped.data) {
        const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        blob.push_back(static_cast<char>(q >> 8U));  // PGM is big-endian
        blob.push_back(static_cast<char>(q & 0xFFU));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ContainerError(ContainerErrorKind::io, "cannot write " + path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

}  // namespace expdiff
