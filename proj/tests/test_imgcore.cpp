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

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "expdiff/edi_io.hpp"
#include "expdiff/image.hpp"
#include "expdiff/rng.hpp"
#include "test_support.hpp"

namespace expdiff {
namespace {

using testing::moments;
using testing::se_mean;
using testing::se_variance;

TEST(Clip01, InteriorFixedPoint) {
    const Image img(1, 4, 4, 0.5);
    EXPECT_EQ(clip01(img), img);
}

TEST(Clip01, ClampsBothEnds) {
    Image img(1, 1, 2);
    img.data = {-0.2, 1.7};
    const auto out = clip01(img);
    EXPECT_EQ(out.data[0], 0.0);
    EXPECT_EQ(out.data[1], 1.0);
}

TEST(Clip01, IdempotentAndMonotone) {
    const auto img = testing::random_image(2, 8, 8, -1.0, 2.0, 3);
    const auto once = clip01(img);
    EXPECT_EQ(clip01(once), once);
    auto brighter = img;
    for (auto& v : brighter.data) v += 0.05;
    const auto b = clip01(brighter);
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_GE(b.data[i], once.data[i]);
}

TEST(Clip01, NonFiniteNamesIndex) {
    Image img(1, 2, 2, 0.1);
    img.data[3] = std::numeric_limits<double>::quiet_NaN();
    try {
        (void)clip01(img);
        FAIL() << "expected an error";
    } catch (const std::domain_error& e) {
        EXPECT_NE(std::string(e.what()).find('3'), std::string::npos) << e.what();
    }
}

TEST(Amplify, UnitRatioIsIdentity) {
    const auto img = testing::random_image(1, 5, 5, 0.0, 1.0, 1);
    EXPECT_EQ(amplify(img, 0.7, 0.7), img);
}

TEST(Amplify, ScalarMultiply) {
    const auto out = amplify(Image(1, 3, 3, 0.003), 1.0, 100.0);
    for (double v : out.data) EXPECT_NEAR(v, 0.3, 1e-15);
}

TEST(Amplify, ComposesMultiplicatively) {
    const auto img = testing::random_image(1, 6, 6, -0.5, 1.5, 2);
    const auto two = amplify(amplify(img, 0.01, 0.37), 0.37, 1.0);
    const auto one = amplify(img, 0.01, 1.0);
    for (std::size_t i = 0; i < img.size(); ++i) {
        EXPECT_NEAR(two.data[i], one.data[i], 4 * std::numeric_limits<double>::epsilon() * std::abs(one.data[i]));
    }
}

TEST(Amplify, NoClipping) {
    const auto out = amplify(Image(1, 1, 1, 0.5), 0.1, 1.0);
    EXPECT_DOUBLE_EQ(out.data[0], 5.0);
}

TEST(Amplify, RejectsNonPositiveSource) {
    EXPECT_THROW((void)amplify(Image(1, 1, 1), 0.0, 1.0), std::invalid_argument);
    EXPECT_THROW((void)amplify(Image(1, 1, 1), -1.0, 1.0), std::invalid_argument);
}

TEST(ExposureMeta, Validation) {
    EXPECT_NO_THROW((ExposureMeta{0.01, 100}.validate()));
    EXPECT_THROW((ExposureMeta{0.0, 100}.validate()), std::invalid_argument);
    EXPECT_THROW((ExposureMeta{1.0, 0.5}.validate()), std::invalid_argument);
}

TEST(Crop, ExtractsWindow) {
    Image img(1, 4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) img.at(0, y, x) = y * 10 + x;
    const auto c = crop(img, 1, 2, 2, 2);
    EXPECT_EQ(c.data, (std::vector<double>{12, 13, 22, 23}));
    EXPECT_THROW((void)crop(img, 3, 3, 2, 2), std::out_of_range);
}

TEST(Rng, SameSeedAndStreamIsBitIdentical) {
    Rng a(42, 7);
    Rng b(42, 7);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(a.next_u64(), b.next_u64());
        ASSERT_EQ(a.normal(), b.normal());
        ASSERT_EQ(a.poisson(3.5), b.poisson(3.5));
        ASSERT_EQ(a.poisson(120.0), b.poisson(120.0));
    }
}

TEST(Rng, StreamsDiffer) {
    Rng a(42, 0);
    Rng b(42, 1);
    int equal = 0;
    for (int i = 0; i < 100; ++i) equal += a.next_u32() == b.next_u32();
    EXPECT_LT(equal, 3);
}

TEST(Rng, KnownPcg32Sequence) {
    // Reference output of the PCG32 demo program (seed 42, sequence 54).
    Rng rng(42, 54);
    const std::uint32_t expected[] = {0xa15c02b7, 0x7b47f409, 0xba1d3330, 0x83d2f293, 0xbfa4784b, 0xcbed606e};
    for (auto e : expected) EXPECT_EQ(rng.next_u32(), e);
}

TEST(Rng, UniformRanges) {
    Rng rng(1, 0);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        const double o = rng.uniform_open();
        ASSERT_GT(o, 0.0);
        ASSERT_LT(o, 1.0);
        ASSERT_LT(rng.below(7), 7u);
    }
}

TEST(PoissonSample, ZeroRateGivesZero) {
    Rng rng(3, 0);
    const auto out = poisson_sample(rng, Image(1, 16, 16, 0.0));
    for (double v : out.data) EXPECT_EQ(v, 0.0);
}

TEST(PoissonSample, RejectsInvalidRates) {
    Rng rng(3, 0);
    EXPECT_THROW((void)poisson_sample(rng, Image(1, 1, 1, -0.1)), std::domain_error);
    EXPECT_THROW((void)poisson_sample(rng, Image(1, 1, 1, std::numeric_limits<double>::infinity())),
                 std::domain_error);
}

TEST(PoissonSample, RateFourMeanAndVariance) {
    Rng rng(2026, 1);
    const auto out = poisson_sample(rng, Image(1, 1000, 1000, 4.0));
    const auto m = moments(out);
    EXPECT_NEAR(m.mean, 4.0, 3 * 2.0 / 1000);
    EXPECT_NEAR(m.variance, 4.0, 0.05 * 4.0);
    for (double v : out.data) ASSERT_EQ(v, std::floor(v));
}

class PoissonMoments : public ::testing::TestWithParam<double> {};

TEST_P(PoissonMoments, WithinThreeStandardErrors) {
    const double rate = GetParam();
    Rng rng(11, static_cast<std::uint64_t>(rate * 100));
    const auto out = poisson_sample(rng, Image(1, 1000, 1000, rate));
    const auto m = moments(out);
    const double n = 1e6;
    EXPECT_NEAR(m.mean, rate, 3 * std::sqrt(rate / n));
    // Poisson: var(s^2) ~ (mu4 - sigma^4)/n = (rate + 2 rate^2)/n.
    EXPECT_NEAR(m.variance, rate, 3 * std::sqrt((rate + 2 * rate * rate) / n));
}

// Rates straddle the inversion/rejection switch at 10.
INSTANTIATE_TEST_SUITE_P(Rates, PoissonMoments, ::testing::Values(0.5, 4.0, 9.99, 10.0, 64.0, 1e4));

TEST(PoissonSample, SmallRatePmfMatches) {
    Rng rng(5, 0);
    const double rate = 2.5;
    std::vector<int> counts(12, 0);
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(rng.poisson(rate));
        if (k < counts.size()) ++counts[k];
    }
    double p = std::exp(-rate);
    for (std::size_t k = 0; k < 8; ++k) {
        const double freq = static_cast<double>(counts[k]) / n;
        EXPECT_NEAR(freq, p, 4 * std::sqrt(p * (1 - p) / n)) << "k=" << k;
        p *= rate / static_cast<double>(k + 1);
    }
}

TEST(PoissonSample, LargeRatePmfMatches) {
    Rng rng(6, 0);
    const double rate = 30.0;
    std::vector<int> counts(80, 0);
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(rng.poisson(rate));
        if (k < counts.size()) ++counts[k];
    }
    for (std::size_t k = 20; k < 41; ++k) {
        const double logp = -rate + static_cast<double>(k) * std::log(rate) - std::lgamma(static_cast<double>(k) + 1);
        const double p = std::exp(logp);
        const double freq = static_cast<double>(counts[k]) / n;
        EXPECT_NEAR(freq, p, 4 * std::sqrt(p * (1 - p) / n)) << "k=" << k;
    }
}

TEST(GaussianSample, ZeroSigmaIsConstant) {
    Rng rng(1, 0);
    const auto out = gaussian_sample(rng, 0.25, 0.0, 1, 4, 4);
    for (double v : out.data) EXPECT_EQ(v, 0.25);
}

TEST(GaussianSample, StandardMoments) {
    Rng rng(8, 0);
    const auto m = moments(gaussian_sample(rng, 0.0, 1.0, 1, 1000, 1000));
    EXPECT_NEAR(m.mean, 0.0, 0.005);
    EXPECT_NEAR(m.variance, 1.0, 3 * se_variance(m));
}

TEST(GaussianSample, SigmaTwoVariance) {
    Rng rng(9, 0);
    const auto m = moments(gaussian_sample(rng, 0.0, 2.0, 1, 1000, 1000));
    EXPECT_NEAR(m.variance, 4.0, 0.05 * 4.0);
    EXPECT_NEAR(m.mean, 0.0, 3 * se_mean(m));
}

TEST(GaussianSample, RejectsNegativeSigma) {
    Rng rng(1, 0);
    EXPECT_THROW((void)gaussian_sample(rng, 0.0, -1.0, 1, 2, 2), std::invalid_argument);
}

class EdiTest : public ::testing::Test {
protected:
    testing::ScratchDir dir{"edi"};
};

TEST_F(EdiTest, RoundTripF64IsBitExact) {
    auto img = testing::random_image(3, 7, 5, -2.0, 3.0, 4);
    img.data[0] = -0.0;
    img.data[1] = std::numeric_limits<double>::denorm_min();
    img.data[2] = 1e300;
    const ExposureMeta meta{0.004, 250};
    const auto path = dir.path() / "a.edi";
    write_image(path, img, meta, PayloadType::f64, "note \"quoted\"");
    const auto file = read_edi(path);
    ASSERT_EQ(file.image.data.size(), img.data.size());
    EXPECT_EQ(std::memcmp(file.image.data.data(), img.data.data(), img.data.size() * sizeof(double)), 0);
    EXPECT_EQ(file.meta, meta);
    EXPECT_EQ(file.note, "note \"quoted\"");
    const auto [again, meta2] = read_image(path);
    EXPECT_TRUE(again.same_shape(img));
    EXPECT_EQ(meta2, meta);
}

TEST_F(EdiTest, RoundTripF32OfFloatValues) {
    Image img(1, 3, 3);
    for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<float>(0.1 * static_cast<double>(i));
    const auto path = dir.path() / "f.edi";
    write_image(path, img, {1.0, 1.0}, PayloadType::f32);
    EXPECT_EQ(read_edi(path).image, img);
}

TEST_F(EdiTest, WrongMagicIsNotEdi) {
    const auto path = dir.path() / "bad.edi";
    std::ofstream(path, std::ios::binary) << "PNG!garbage";
    try {
        (void)read_edi(path);
        FAIL();
    } catch (const ContainerError& e) {
        EXPECT_EQ(e.kind(), ContainerErrorKind::not_edi);
        EXPECT_NE(std::string(e.what()).find("not an EDI container"), std::string::npos);
    }
}

TEST_F(EdiTest, TruncatedPayloadIsMismatch) {
    const auto path = dir.path() / "t.edi";
    write_image(path, Image(1, 4, 4, 0.5), {1.0, 1.0});
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
    try {
        (void)read_edi(path);
        FAIL();
    } catch (const ContainerError& e) {
        EXPECT_EQ(e.kind(), ContainerErrorKind::payload_mismatch);
        EXPECT_NE(std::string(e.what()).find("payload length mismatch"), std::string::npos);
    }
}

TEST_F(EdiTest, MalformedHeaderAndVersionAreDistinct) {
    const auto bad_json = dir.path() / "h.edi";
    std::ofstream(bad_json, std::ios::binary) << "EDI1{not json\n";
    try {
        (void)read_edi(bad_json);
        FAIL();
    } catch (const ContainerError& e) {
        EXPECT_EQ(e.kind(), ContainerErrorKind::malformed_header);
    }
    const auto v2 = dir.path() / "v.edi";
    std::ofstream(v2, std::ios::binary) << "EDI2{}\n";
    try {
        (void)read_edi(v2);
        FAIL();
    } catch (const ContainerError& e) {
        EXPECT_EQ(e.kind(), ContainerErrorKind::unsupported_version);
    }
}

TEST_F(EdiTest, MissingFileIsIoError) {
    try {
        (void)read_edi(dir.path() / "missing.edi");
        FAIL();
    } catch (const ContainerError& e) {
        EXPECT_EQ(e.kind(), ContainerErrorKind::io);
    }
}

TEST_F(EdiTest, Pgm16Encoding) {
    Image img(1, 1, 3);
    img.data = {-0.5, 0.5, 2.0};
    const auto path = dir.path() / "p.pgm";
    write_pgm16(path, img);
    std::ifstream in(path, std::ios::binary);
    const std::string blob{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    const std::string header = "P5\n3 1\n65535\n";
    ASSERT_EQ(blob.substr(0, header.size()), header);
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data() + header.size());
    EXPECT_EQ(p[0] * 256 + p[1], 0);
    EXPECT_EQ(p[2] * 256 + p[3], 32768);  // round(0.5 * 65535)
    EXPECT_EQ(p[4] * 256 + p[5], 65535);
}

}  // namespace
}  // namespace expdiff
