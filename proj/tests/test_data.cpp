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

#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "expdiff/data.hpp"
#include "expdiff/edi_io.hpp"
#include "test_support.hpp"

namespace expdiff {
namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

NoiseModel default_noise() {
    NoiseModel m;
    m.gain = 2e-4;
    m.sigma_read = 2e-4;
    return m;
}

TEST(SceneSpec, Validation) {
    SceneSpec s;
    EXPECT_NO_THROW(s.validate());
    s.height = 4;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s = {};
    s.weight_smooth = 0.5;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s = {};
    s.highlight_fraction = 0.3;
    EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(SceneSpec, JsonRoundTrip) {
    SceneSpec s;
    s.channels = 4;
    s.height = 32;
    s.width = 48;
    s.highlight_fraction = 0.05;
    s.seed = 123456789012345ULL;
    const nlohmann::json j = s;
    const auto back = j.get<SceneSpec>();
    EXPECT_EQ(back.channels, 4);
    EXPECT_EQ(back.width, 48);
    EXPECT_EQ(back.highlight_fraction, 0.05);
    EXPECT_EQ(back.seed, s.seed);
}

TEST(GenScene, CleanRangeWithoutHighlights) {
    SceneSpec s;
    Rng rng(1, 0);
    const auto img = gen_scene(s, rng);
    EXPECT_EQ(img.height, 128);
    EXPECT_EQ(img.width, 128);
    for (double v : img.data) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
    }
}

TEST(GenScene, HighlightQuota) {
    SceneSpec s;
    s.highlight_fraction = 0.05;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed, 0);
        const auto img = gen_scene(s, rng);
        int bright = 0;
        for (double v : img.data) bright += v >= 0.98;
        EXPECT_GE(bright, 819) << "seed " << seed;
        for (double v : img.data) ASSERT_LE(v, 1.0);
    }
}

TEST(GenScene, Reproducible) {
    SceneSpec s;
    s.channels = 4;
    s.height = 32;
    s.width = 32;
    s.highlight_fraction = 0.1;
    Rng a(9, 3);
    Rng b(9, 3);
    EXPECT_EQ(gen_scene(s, a), gen_scene(s, b));
    Rng c(10, 3);
    EXPECT_NE(gen_scene(s, a), gen_scene(s, c));
}

TEST(GenScene, DegenerateSizeThrows) {
    SceneSpec s;
    s.width = 2;
    Rng rng(1, 0);
    EXPECT_THROW((void)gen_scene(s, rng), std::invalid_argument);
}

class DatasetTest : public ::testing::Test {
protected:
    testing::ScratchDir dir{"dataset"};
    SceneSpec spec() const {
        SceneSpec s;
        s.height = 32;
        s.width = 32;
        s.seed = 17;
        return s;
    }
};

TEST_F(DatasetTest, Cardinality) {
    const auto m = build_dataset(spec(), 2, default_noise(), {100}, dir.path() / "d");
    EXPECT_EQ(m.items.size(), 2u);
    int clean = 0, noisy = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir.path() / "d")) {
        const auto name = e.path().filename().string();
        clean += name.starts_with("clean_");
        noisy += name.starts_with("noisy_");
    }
    EXPECT_EQ(clean, 2);
    EXPECT_EQ(noisy, 2);
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "d" / "manifest.json"));
}

TEST_F(DatasetTest, NoisyHeadersCarryExposure) {
    const auto m = build_dataset(spec(), 2, default_noise(), {100, 250, 300}, dir.path() / "d");
    ASSERT_EQ(m.items.size(), 6u);
    for (const auto& it : m.items) {
        const auto noisy = read_edi(m.root / it.noisy);
        EXPECT_DOUBLE_EQ(noisy.meta.lambda, 1.0 / it.ratio);
        EXPECT_EQ(noisy.meta.ratio, it.ratio);
        EXPECT_EQ(it.lambda_ref, 1.0);
        const auto clean = read_edi(m.root / it.clean);
        EXPECT_EQ(clean.meta.lambda, 1.0);
    }
}

TEST_F(DatasetTest, ReproducibleBytes) {
    const auto a = build_dataset(spec(), 3, default_noise(), {100, 300}, dir.path() / "a");
    const auto b = build_dataset(spec(), 3, default_noise(), {100, 300}, dir.path() / "b", 3);
    ASSERT_EQ(a.items.size(), b.items.size());
    for (std::size_t i = 0; i < a.items.size(); ++i) {
        EXPECT_EQ(slurp(a.root / a.items[i].clean), slurp(b.root / b.items[i].clean));
        EXPECT_EQ(slurp(a.root / a.items[i].noisy), slurp(b.root / b.items[i].noisy));
    }
    EXPECT_EQ(slurp(a.root / "manifest.json"), slurp(b.root / "manifest.json"));
}

TEST_F(DatasetTest, ManifestRoundTripAndPairs) {
    const auto built = build_dataset(spec(), 2, default_noise(), {250}, dir.path() / "d");
    const auto loaded = load_manifest(dir.path() / "d");
    EXPECT_EQ(loaded.items.size(), built.items.size());
    EXPECT_EQ(loaded.noise, built.noise);
    EXPECT_EQ(loaded.ratios, built.ratios);
    const auto pair = load_pair(loaded, loaded.items[1]);
    EXPECT_NO_THROW(pair.validate());
    EXPECT_EQ(pair.meta_noisy.ratio, 250);
    EXPECT_EQ(pair.noise, default_noise());
    EXPECT_EQ(load_manifest(dir.path() / "d" / "manifest.json").items.size(), 2u);
}

TEST_F(DatasetTest, MissingFileIsReportedWithPath) {
    (void)build_dataset(spec(), 1, default_noise(), {100}, dir.path() / "d");
    std::filesystem::remove(dir.path() / "d" / "clean_0000.edi");
    try {
        (void)load_manifest(dir.path() / "d");
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("clean_0000.edi"), std::string::npos);
    }
}

TEST_F(DatasetTest, RejectsBadRatios) {
    EXPECT_THROW((void)build_dataset(spec(), 1, default_noise(), {0.5}, dir.path() / "d"), std::invalid_argument);
    EXPECT_THROW((void)build_dataset(spec(), 1, default_noise(), {}, dir.path() / "d"), std::invalid_argument);
}

PairSample watermark_pair() {
    Image ref(1, 16, 16);
    Image noisy(1, 16, 16);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            ref.at(0, y, x) = (y * 16 + x) / 256.0;
            noisy.at(0, y, x) = -(y * 16 + x);
        }
    }
    PairSample p;
    p.x_ref = ref;
    p.x_noisy = noisy;
    p.meta_ref = {1.0, 1.0};
    p.meta_noisy = {0.01, 100};
    return p;
}

TEST(Patchify, FullSizeIsIdentity) {
    const auto p = watermark_pair();
    Rng rng(1, 0);
    const auto out = patchify(p, 16, rng);
    EXPECT_EQ(out.x_ref, p.x_ref);
    EXPECT_EQ(out.x_noisy, p.x_noisy);
}

TEST(Patchify, WindowsAreAligned) {
    const auto p = watermark_pair();
    Rng rng(2, 0);
    for (int i = 0; i < 50; ++i) {
        const auto out = patchify(p, 5, rng);
        ASSERT_EQ(out.x_ref.height, 5);
        ASSERT_EQ(out.x_ref.width, 5);
        for (std::size_t k = 0; k < out.x_ref.size(); ++k) {
            ASSERT_EQ(out.x_noisy.data[k], -out.x_ref.data[k] * 256.0);
        }
        EXPECT_EQ(out.meta_noisy, p.meta_noisy);
        EXPECT_EQ(out.meta_ref, p.meta_ref);
    }
}

TEST(Patchify, OutputDims) {
    SceneSpec s;
    Rng rng(3, 0);
    NoiseModel noise = default_noise();
    const auto pair = make_pair(gen_scene(s, rng), noise, 250, rng);
    const auto out = patchify(pair, 64, rng);
    EXPECT_EQ(out.x_ref.height, 64);
    EXPECT_EQ(out.x_noisy.width, 64);
}

TEST(Patchify, TooLargeThrows) {
    Rng rng(1, 0);
    EXPECT_THROW((void)patchify(watermark_pair(), 17, rng), std::invalid_argument);
}

TEST(MakePair, UsesReferenceExposure) {
    Rng rng(4, 0);
    const auto pair = make_pair(Image(1, 8, 8, 0.5), default_noise(), 100, rng);
    EXPECT_EQ(pair.meta_ref.lambda, 1.0);
    EXPECT_DOUBLE_EQ(pair.meta_noisy.lambda, 0.01);
    EXPECT_NO_THROW(pair.validate());
}

}  // namespace
}  // namespace expdiff
