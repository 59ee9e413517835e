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

#include "expdiff/data.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "expdiff/edi_io.hpp"

namespace expdiff {

namespace {

constexpr double kSceneFloor = 0.02;
constexpr double kSceneCeiling = 0.9;
constexpr std::uint64_t kStreamsPerScene = 64;

void normalize_unit(std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double a = *lo;
    const double span = *hi - *lo;
    for (double& x : v) x = span > 0.0 ? (x - a) / span : 0.5;
}

std::vector<double> smooth_layer(int h, int w, Rng& rng) {
    const double gx = rng.uniform() * 2.0 - 1.0;
    const double gy = rng.uniform() * 2.0 - 1.0;
    const double fx = 0.5 + 1.5 * rng.uniform();
    const double fy = 0.5 + 1.5 * rng.uniform();
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const double amp = 0.5 * rng.uniform();
    std::vector<double> out(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = static_cast<double>(x) / w;
            const double v = static_cast<double>(y) / h;
            out[static_cast<std::size_t>(y) * w + x] =
                gx * u + gy * v + amp * std::sin(2.0 * std::numbers::pi * (fx * u + fy * v) + phase);
        }
    }
    normalize_unit(out);
    return out;
}

std::vector<double> shapes_layer(int h, int w, Rng& rng) {
    std::vector<double> out(static_cast<std::size_t>(h) * w, rng.uniform());
    const int count = 6 + static_cast<int>(rng.below(7));
    const double dim = std::min(h, w);
    constexpr int kSuper = 4;
    for (int s = 0; s < count; ++s) {
        const bool disk = rng.uniform() < 0.5;
        const double cx = rng.uniform() * w;
        const double cy = rng.uniform() * h;
        const double rx = dim * (0.04 + 0.18 * rng.uniform());
        const double ry = disk ? rx : dim * (0.04 + 0.18 * rng.uniform());
        const double value = rng.uniform();
        const int x0 = std::max(0, static_cast<int>(std::floor(cx - rx)) - 1);
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + rx)) + 1);
        const int y0 = std::max(0, static_cast<int>(std::floor(cy - ry)) - 1);
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + ry)) + 1);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                int inside = 0;
                for (int sy = 0; sy < kSuper; ++sy) {
                    for (int sx = 0; sx < kSuper; ++sx) {
                        const double px = x + (sx + 0.5) / kSuper;
                        const double py = y + (sy + 0.5) / kSuper;
                        const double dx = (px - cx) / rx;
                        const double dy = (py - cy) / ry;
                        const bool hit = disk ? dx * dx + dy * dy <= 1.0 : std::fabs(dx) <= 1.0 && std::fabs(dy) <= 1.0;
                        inside += hit ? 1 : 0;
                    }
                }
                const double alpha = static_cast<double>(inside) / (kSuper * kSuper);
                double& p = out[static_cast<std::size_t>(y) * w + x];
                p = (1.0 - alpha) * p + alpha * value;
            }
        }
    }
    return out;
}

std::vector<double> texture_layer(int h, int w, Rng& rng) {
    std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
    for (int k = 0; k < 6; ++k) {
        const double cycles = 2.0 + 10.0 * rng.uniform();
        const double theta = std::numbers::pi * rng.uniform();
        const double phase = 2.0 * std::numbers::pi * rng.uniform();
        const double amp = 0.3 + 0.7 * rng.uniform();
        const double kx = cycles * std::cos(theta) / w;
        const double ky = cycles * std::sin(theta) / h;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                out[static_cast<std::size_t>(y) * w + x] +=
                    amp * std::sin(2.0 * std::numbers::pi * (kx * x + ky * y) + phase);
            }
        }
    }
    normalize_unit(out);
    return out;
}

std::string ratio_tag(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", ratio);
    return buf;
}

}  // namespace

void SceneSpec::validate() const {
    if (channels <= 0 || height < 8 || width < 8) throw std::invalid_argument("scene: degenerate size");
    if (weight_smooth < 0.0 || weight_shapes < 0.0 || weight_texture < 0.0) {
        throw std::invalid_argument("scene: content weights must be >= 0");
    }
    const double sum = weight_smooth + weight_shapes + weight_texture;
    if (std::fabs(sum - 1.0) > 1e-9) throw std::invalid_argument("scene: content weights must sum to 1");
    if (!(highlight_fraction >= 0.0 && highlight_fraction <= 0.2)) {
        throw std::invalid_argument("scene: highlight_fraction must lie in [0, 0.2]");
    }
}

void to_json(nlohmann::json& j, const SceneSpec& s) {
    j = {{"channels", s.channels},
         {"height", s.height},
         {"width", s.width},
         {"weight_smooth", s.weight_smooth},
         {"weight_shapes", s.weight_shapes},
         {"weight_texture", s.weight_texture},
         {"highlight_fraction", s.highlight_fraction},
         {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SceneSpec& s) {
    s.channels = j.at("channels").get<int>();
    s.height = j.at("height").get<int>();
    s.width = j.at("width").get<int>();
    s.weight_smooth = j.at("weight_smooth").get<double>();
    s.weight_shapes = j.at("weight_shapes").get<double>();
    s.weight_texture = j.at("weight_texture").get<double>();
    s.highlight_fraction = j.at("highlight_fraction").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
}

Image gen_scene(const SceneSpec& spec, Rng& rng) {
    spec.validate();
    const int h = spec.height;
    const int w = spec.width;
    const auto smooth = smooth_layer(h, w, rng);
    const auto shapes = shapes_layer(h, w, rng);
    const auto texture = texture_layer(h, w, rng);

    Image img(spec.channels, h, w);
    std::vector<double> gains(spec.channels, 1.0);
    for (int c = 1; c < spec.channels; ++c) gains[c] = 0.6 + 0.4 * rng.uniform();
    const std::size_t plane = img.plane_size();
    for (std::size_t p = 0; p < plane; ++p) {
        const double mix = spec.weight_smooth * smooth[p] + spec.weight_shapes * shapes[p] + spec.weight_texture * texture[p];
        const double v = kSceneFloor + (kSceneCeiling - kSceneFloor) * mix;
        for (int c = 0; c < spec.channels; ++c) img.data[c * plane + p] = v * gains[c];
    }

    if (spec.highlight_fraction > 0.0) {
        const auto quota = static_cast<std::size_t>(std::ceil(spec.highlight_fraction * static_cast<double>(plane)));
        std::vector<bool> lit(plane, false);
        std::size_t count = 0;
        while (count < quota) {
            const int radius = 2 + static_cast<int>(rng.below(5));
            const int cx = static_cast<int>(rng.below(static_cast<std::uint32_t>(w)));
            const int cy = static_cast<int>(rng.below(static_cast<std::uint32_t>(h)));
            const double level = kHighlightLevel + (1.0 - kHighlightLevel) * rng.uniform();
            for (int y = std::max(0, cy - radius); y <= std::min(h - 1, cy + radius); ++y) {
                for (int x = std::max(0, cx - radius); x <= std::min(w - 1, cx + radius); ++x) {
                    if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > radius * radius) continue;
                    const std::size_t p = static_cast<std::size_t>(y) * w + x;
                    for (int c = 0; c < spec.channels; ++c) img.data[c * plane + p] = level;
                    if (!lit[p]) {
                        lit[p] = true;
                        ++count;
                    }
                }
            }
        }
    }
    return img;
}

void to_json(nlohmann::json& j, const DatasetManifest& m) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& it : m.items) {
        items.push_back({{"id", it.id},
                         {"scene", it.scene},
                         {"clean", it.clean},
                         {"noisy", it.noisy},
                         {"ratio", it.ratio},
                         {"lambda_T", it.lambda_input},
                         {"lambda_ref", it.lambda_ref},
                         {"seed", it.seed},
                         {"stream", it.stream}});
    }
    j = {{"version", m.version}, {"noise_model", m.noise}, {"ratios", m.ratios}, {"scene", m.scene}, {"items", items}};
}

void from_json(const nlohmann::json& j, DatasetManifest& m) {
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw std::invalid_argument("manifest: unsupported version " + std::to_string(m.version));
    m.noise = j.at("noise_model").get<NoiseModel>();
    m.ratios = j.at("ratios").get<std::vector<double>>();
    m.scene = j.at("scene").get<SceneSpec>();
    m.items.clear();
    for (const auto& it : j.at("items")) {
        ManifestItem item;
        item.id = it.at("id").get<int>();
        item.scene = it.at("scene").get<int>();
        item.clean = it.at("clean").get<std::string>();
        item.noisy = it.at("noisy").get<std::string>();
        item.ratio = it.at("ratio").get<double>();
        item.lambda_input = it.at("lambda_T").get<double>();
        item.lambda_ref = it.at("lambda_ref").get<double>();
        item.seed = it.at("seed").get<std::uint64_t>();
        item.stream = it.at("stream").get<std::uint64_t>();
        m.items.push_back(std::move(item));
    }
    for (double r : m.ratios) {
        if (!(r >= 1.0)) throw std::invalid_argument("manifest: ratios must be >= 1");
    }
}

DatasetManifest build_dataset(const SceneSpec& spec, int count, const NoiseModel& noise,
                              const std::vector<double>& ratios, const std::filesystem::path& out_dir, int jobs) {
    spec.validate();
    noise.validate();
    if (count < 0) throw std::invalid_argument("build_dataset: count must be >= 0");
    if (ratios.empty() || ratios.size() >= kStreamsPerScene) {
        throw std::invalid_argument("build_dataset: need between 1 and 63 ratios");
    }
    for (double r : ratios) {
        if (!(r >= 1.0)) throw std::invalid_argument("build_dataset: ratios must be >= 1");
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("build_dataset: cannot create " + out_dir.string() + ": " + ec.message());

    DatasetManifest manifest;
    manifest.noise = noise;
    manifest.ratios = ratios;
    manifest.scene = spec;
    manifest.root = out_dir;
    const std::size_t per_scene = ratios.size();
    manifest.items.resize(static_cast<std::size_t>(count) * per_scene);

    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                Rng scene_rng(spec.seed, static_cast<std::uint64_t>(i) * kStreamsPerScene);
                const Image clean = gen_scene(spec, scene_rng);
                char name[64];
                std::snprintf(name, sizeof name, "clean_%04d.edi", i);
                const std::string clean_name = name;
                write_image(out_dir / clean_name, clean, {kReferenceExposure, 1.0});
                for (std::size_t j = 0; j < per_scene; ++j) {
                    const double ratio = ratios[j];
                    const double lambda_t = kReferenceExposure / ratio;
                    const std::uint64_t stream = static_cast<std::uint64_t>(i) * kStreamsPerScene + 1 + j;
                    Rng noise_rng(spec.seed, stream);
                    const Image noisy = synthesize_lowlight(clean, kReferenceExposure, lambda_t, noise, noise_rng);
                    const std::string noisy_name = "noisy_" + std::string(name + 6, 4) + "_x" + ratio_tag(ratio) + ".edi";
                    write_image(out_dir / noisy_name, noisy, {lambda_t, ratio});
                    auto& item = manifest.items[static_cast<std::size_t>(i) * per_scene + j];
                    item.id = static_cast<int>(static_cast<std::size_t>(i) * per_scene + j);
                    item.scene = i;
                    item.clean = clean_name;
                    item.noisy = noisy_name;
                    item.ratio = ratio;
                    item.lambda_input = lambda_t;
                    item.lambda_ref = kReferenceExposure;
                    item.seed = spec.seed;
                    item.stream = stream;
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int threads = std::max(1, std::min(jobs, count));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    const nlohmann::json j = manifest;
    std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("build_dataset: cannot write " + (out_dir / "manifest.json").string());
    out << j.dump(2) << '\n';
    return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    const auto file = std::filesystem::is_directory(path) ? path / "manifest.json" : path;
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open manifest " + file.string());
    DatasetManifest m = nlohmann::json::parse(in).get<DatasetManifest>();
    m.root = file.parent_path();
    for (const auto& it : m.items) {
        for (const auto& rel : {it.clean, it.noisy}) {
            if (!std::filesystem::exists(m.root / rel)) {
                throw std::runtime_error("manifest " + file.string() + " references missing file " + rel);
            }
        }
    }
    return m;
}

PairSample load_pair(const DatasetManifest& manifest, const ManifestItem& item) {
    PairSample pair;
    auto [clean, meta_ref] = read_image(manifest.root / item.clean);
    auto [noisy, meta_noisy] = read_image(manifest.root / item.noisy);
    pair.x_ref = std::move(clean);
    pair.x_noisy = std::move(noisy);
    pair.meta_ref = meta_ref;
    pair.meta_noisy = meta_noisy;
    pair.noise = manifest.noise;
    pair.seed = item.seed;
    pair.validate();
    return pair;
}

PairSample make_pair(const Image& x_ref, const NoiseModel& noise, double ratio, Rng& rng) {
    PairSample pair;
    const double lambda_t = kReferenceExposure / ratio;
    pair.x_ref = x_ref;
    pair.x_noisy = synthesize_lowlight(x_ref, kReferenceExposure, lambda_t, noise, rng);
    pair.meta_ref = {kReferenceExposure, 1.0};
    pair.meta_noisy = {lambda_t, ratio};
    pair.noise = noise;
    pair.seed = rng.seed();
    return pair;
}

PairSample patchify(const PairSample& pair, int patch, Rng& rng) {
    require_same_shape(pair.x_ref, pair.x_noisy, "patchify");
    if (patch <= 0 || patch > pair.x_ref.height || patch > pair.x_ref.width) {
        throw std::invalid_argument("patchify: patch " + std::to_string(patch) + " larger than image " +
                                    pair.x_ref.shape_string());
    }
    const auto top = static_cast<int>(rng.below(static_cast<std::uint32_t>(pair.x_ref.height - patch + 1)));
    const auto left = static_cast<int>(rng.below(static_cast<std::uint32_t>(pair.x_ref.width - patch + 1)));
    PairSample out = pair;
    out.x_ref = crop(pair.x_ref, top, left, patch, patch);
    out.x_noisy = crop(pair.x_noisy, top, left, patch, patch);
    return out;
}

}  // namespace expdiff
