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
#include <nlohmann/json.hpp>

#include "expdiff/noise.hpp"
#include "test_support.hpp"

namespace expdiff {
namespace {

using testing::moments;
using testing::se_mean;
using testing::se_variance;

NoiseModel pg(double k, double sigma) {
    NoiseModel m;
    m.gain = k;
    m.sigma_read = sigma;
    return m;
}

TEST(NoiseModel, Validation) {
    EXPECT_NO_THROW(pg(0.01, 0.0).validate());
    EXPECT_THROW(pg(0.0, 0.0).validate(), std::invalid_argument);
    EXPECT_THROW(pg(0.01, -1.0).validate(), std::invalid_argument);
    auto eld = pg(0.01, 0.0);
    eld.kind = NoiseKind::eld_like;
    eld.sigma_row = -0.1;
    EXPECT_THROW(eld.validate(), std::invalid_argument);
    eld.sigma_row = 0.0;
    eld.quant_step = -1.0;
    EXPECT_THROW(eld.validate(), std::invalid_argument);
}

TEST(NoiseModel, JsonRoundTrip) {
    NoiseModel m;
    m.kind = NoiseKind::eld_like;
    m.gain = 3e-4;
    m.sigma_read = 1e-3;
    m.sigma_row = 2e-4;
    m.quant_step = 1.0 / 4096;
    const nlohmann::json j = m;
    EXPECT_EQ(j.at("kind"), "ELDlike");
    EXPECT_EQ(j.at("K"), 3e-4);
    EXPECT_EQ(j.get<NoiseModel>(), m);
    const nlohmann::json p = pg(0.01, 0.002);
    EXPECT_EQ(p.at("kind"), "PG");
    EXPECT_FALSE(p.contains("sigma_row"));
    EXPECT_EQ(p.get<NoiseModel>(), pg(0.01, 0.002));
}

TEST(Synthesize, ZeroSignalZeroNoiseIsZero) {
    Rng rng(1, 0);
    const auto out = synthesize_lowlight(Image(1, 32, 32, 0.0), 1.0, 0.01, pg(0.01, 0.0), rng);
    for (double v : out.data) EXPECT_EQ(v, 0.0);
}

TEST(Synthesize, FullExposureShotNoiseMoments) {
    Rng rng(2, 0);
    const double k = 0.01;
    const auto out = synthesize_lowlight(Image(1, 1000, 1000, 0.5), 1.0, 1.0, pg(k, 0.0), rng);
    const auto m = moments(out);
    EXPECT_NEAR(m.mean, 0.5, 3 * std::sqrt(k * 0.5) / 1000);
    EXPECT_NEAR(m.variance, k * 0.5, 0.05 * k * 0.5);
}

TEST(Synthesize, PureReadNoiseStd) {
    Rng rng(3, 0);
    const auto out = synthesize_lowlight(Image(1, 1000, 1000, 0.0), 1.0, 0.1, pg(0.01, 0.002), rng);
    const auto m = moments(out);
    EXPECT_NEAR(std::sqrt(m.variance), 0.002, 0.05 * 0.002);
    EXPECT_NEAR(m.mean, 0.0, 3 * se_mean(m));
}

TEST(Synthesize, NoClippingOfNegativeReadout) {
    Rng rng(4, 0);
    const auto out = synthesize_lowlight(Image(1, 64, 64, 0.0), 1.0, 0.1, pg(0.01, 0.01), rng);
    int negative = 0;
    for (double v : out.data) negative += v < 0.0;
    EXPECT_GT(negative, 1000);
}

TEST(Synthesize, RejectsBadExposures) {
    Rng rng(1, 0);
    const Image x(1, 2, 2, 0.5);
    EXPECT_THROW((void)synthesize_lowlight(x, 1.0, 1.5, pg(0.01, 0.0), rng), std::invalid_argument);
    EXPECT_THROW((void)synthesize_lowlight(x, 1.0, 0.0, pg(0.01, 0.0), rng), std::invalid_argument);
}

TEST(Synthesize, VarianceIsAffineInSignal) {
    const double k = 0.004;
    const double sigma = 0.01;
    std::vector<double> xs;
    std::vector<double> vs;
    for (int i = 1; i <= 9; ++i) {
        const double level = 0.1 * i;
        Rng rng(5, static_cast<std::uint64_t>(i));
        const auto m = moments(synthesize_lowlight(Image(1, 500, 500, level), 1.0, 1.0, pg(k, sigma), rng));
        xs.push_back(m.mean);
        vs.push_back(m.variance);
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += vs[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (vs[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    EXPECT_NEAR(slope, k, 0.05 * k);
    EXPECT_NEAR(intercept, sigma * sigma, 0.1 * sigma * sigma);
}

TEST(Synthesize, SnrGrowsWithExposure) {
    double last = 0.0;
    for (double lambda : {0.01, 0.1, 1.0}) {
        Rng rng(6, 0);
        const auto m = moments(synthesize_lowlight(Image(1, 300, 300, 0.4), 1.0, lambda, pg(0.001, 0.0005), rng));
        const double snr = m.mean / std::sqrt(m.variance);
        EXPECT_GT(snr, last);
        last = snr;
    }
}

TEST(Synthesize, EldLikeRowNoiseIsSharedAcrossRow) {
    NoiseModel m = pg(0.01, 0.0);
    m.kind = NoiseKind::eld_like;
    m.sigma_row = 0.05;
    Rng rng(7, 0);
    const auto out = synthesize_lowlight(Image(1, 400, 50, 0.0), 1.0, 0.5, m, rng);
    std::vector<double> row_means;
    for (int y = 0; y < out.height; ++y) {
        for (int x = 1; x < out.width; ++x) ASSERT_EQ(out.at(0, y, x), out.at(0, y, 0));
        row_means.push_back(out.at(0, y, 0));
    }
    EXPECT_NEAR(std::sqrt(moments(row_means).variance), 0.05, 0.01);
}

TEST(Synthesize, EldLikeQuantizesToStep) {
    NoiseModel m = pg(0.01, 0.003);
    m.kind = NoiseKind::eld_like;
    m.quant_step = 0.01;
    Rng rng(8, 0);
    const auto out = synthesize_lowlight(Image(1, 32, 32, 0.3), 1.0, 0.5, m, rng);
    for (double v : out.data) {
        const double q = v / m.quant_step;
        EXPECT_NEAR(q, std::round(q), 1e-9);
    }
}

TEST(IncrementQ, ZeroReferenceLeavesStateUnchanged) {
    Rng rng(1, 0);
    const auto x_t = testing::random_image(1, 8, 8, -0.1, 0.2, 1);
    EXPECT_EQ(sample_increment_q(x_t, Image(1, 8, 8, 0.0), 0.2, 0.5, 1.0, pg(0.02, 0.01), rng), x_t);
}

TEST(IncrementQ, IncrementMean) {
    Rng rng(2, 0);
    const Image x_t(1, 1000, 1000, 0.0);
    const auto out = sample_increment_q(x_t, Image(1, 1000, 1000, 0.8), 0.2, 0.5, 1.0, pg(0.02, 0.0), rng);
    const auto m = moments(out);
    EXPECT_NEAR(m.mean, 0.24, 3 * std::sqrt(0.02 * 0.24 / 1e6));
    EXPECT_NEAR(m.variance, 0.02 * 0.24, 3 * se_variance(m));
}

TEST(IncrementQ, RejectsNonIncreasingExposure) {
    Rng rng(1, 0);
    const Image x(1, 2, 2, 0.5);
    EXPECT_THROW((void)sample_increment_q(x, x, 0.5, 0.5, 1.0, pg(0.01, 0.0), rng), std::invalid_argument);
    EXPECT_THROW((void)sample_increment_q(x, x, 0.5, 0.2, 1.0, pg(0.01, 0.0), rng), std::invalid_argument);
}

TEST(IncrementQ, CompositionMatchesOneShot) {
    const double k = 0.01;
    const Image ref(1, 1000, 1000, 0.6);
    Rng a(3, 0);
    auto x = synthesize_lowlight(ref, 1.0, 0.1, pg(k, 0.0), a);
    x = sample_increment_q(x, ref, 0.1, 0.4, 1.0, pg(k, 0.0), a);
    x = sample_increment_q(x, ref, 0.4, 1.0, 1.0, pg(k, 0.0), a);
    Rng b(3, 1);
    const auto direct = synthesize_lowlight(ref, 1.0, 1.0, pg(k, 0.0), b);
    const auto mc = moments(x);
    const auto md = moments(direct);
    EXPECT_NEAR(mc.mean, md.mean, 3 * std::hypot(se_mean(mc), se_mean(md)));
    EXPECT_NEAR(mc.variance, md.variance, 3 * std::hypot(se_variance(mc), se_variance(md)));
}

TEST(PairSample, Validation) {
    PairSample p;
    p.x_ref = Image(1, 2, 2, 0.5);
    p.x_noisy = Image(1, 2, 2, 0.01);
    p.meta_ref = {1.0, 1.0};
    p.meta_noisy = {0.01, 100.0};
    EXPECT_NO_THROW(p.validate());
    p.meta_noisy.lambda = 2.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p.meta_noisy.lambda = 0.01;
    p.x_ref.data[0] = 1.2;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(DarkFrame, SubtractsBias) {
    const Image img(1, 2, 2, 0.3);
    const Image bias(1, 2, 2, 0.1);
    for (double v : subtract_dark_frame(img, bias).data) EXPECT_NEAR(v, 0.2, 1e-15);
    EXPECT_THROW((void)subtract_dark_frame(img, Image(1, 3, 3)), std::invalid_argument);
}

}  // namespace
}  // namespace expdiff
