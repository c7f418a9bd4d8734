#include <gtest/gtest.h>

#include <random>

#include "haste/tensor.hpp"
#include "oracles.hpp"

using namespace haste;

TEST(Tensor, RejectsBadShapes) {
    EXPECT_THROW(FeatureMap(0, 2, 2), ConfigError);
    EXPECT_THROW(FeatureMap(1, 2, 2, std::vector<float>(3)), ConfigError);
    EXPECT_THROW(FilterBank(1, 1, 2), ConfigError);
    EXPECT_THROW(FilterBank(2, 1, 3, std::vector<float>(17)), ConfigError);
}

TEST(Pad, SinglePixelAllSides) {
    FeatureMap m(1, 1, 1, 5.0f);
    const auto p = pad(m, PaddingSpec::uniform(1));
    ASSERT_EQ(p.height(), 3u);
    ASSERT_EQ(p.width(), 3u);
    for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 3; ++x) EXPECT_EQ(p(0, y, x), (y == 1 && x == 1) ? 5.0f : 0.0f);
}

TEST(Pad, ZeroSpecIsIdentity) {
    std::mt19937_64 rng(3);
    const auto m = oracle::random_map(rng, 2, 4, 5);
    EXPECT_EQ(pad(m, PaddingSpec{}), m);
}

TEST(Pad, RightColumn) {
    FeatureMap m(1, 2, 2, std::vector<float>{1, 2, 3, 4});
    const auto p = pad(m, PaddingSpec{0, 0, 0, 1});
    ASSERT_EQ(p.width(), 3u);
    EXPECT_EQ(p.values(), (std::vector<float>{1, 2, 0, 3, 4, 0}));
}

TEST(Conv2dDirect, OnesCenterIsNine) {
    FeatureMap x(1, 3, 3, 1.0f);
    FilterBank f(1, 1, 3, 1.0f);
    const auto y = conv2d_direct(x, f, PaddingSpec::uniform(1));
    EXPECT_EQ(y(0, 1, 1), 9.0f);
    EXPECT_EQ(y(0, 0, 0), 4.0f);
}

TEST(Conv2dDirect, IdentityKernel) {
    std::mt19937_64 rng(5);
    const auto x = oracle::random_map(rng, 1, 5, 4);
    FilterBank f(1, 1, 3, 0.0f);
    f(0, 0, 1, 1) = 1.0f;
    EXPECT_EQ(conv2d_direct(x, f, PaddingSpec::same(3)), x);
}

TEST(Conv2dDirect, MatchesBruteForce) {
    std::mt19937_64 rng(11);
    const auto x = oracle::random_map(rng, 2, 6, 6);
    const auto f = oracle::random_filters(rng, 3, 2, 3);
    const auto y = conv2d_direct(x, f, PaddingSpec::same(3));
    const auto ref = oracle::conv_same(x, f);
    ASSERT_EQ(y.size(), ref.size());
    EXPECT_LT(oracle::rel_error(y.values(), ref), 1e-6);
}

TEST(Conv2dDirect, ChannelMismatch) {
    EXPECT_THROW(conv2d_direct(FeatureMap(2, 3, 3), FilterBank(1, 3, 3), PaddingSpec::same(3)), ConfigError);
}

TEST(Conv2dDirect, LinearInInput) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<float> coef(-2.0f, 2.0f);
    for (int trial = 0; trial < 10; ++trial) {
        const auto x1 = oracle::random_map(rng, 3, 7, 5);
        const auto x2 = oracle::random_map(rng, 3, 7, 5);
        const auto f = oracle::random_filters(rng, 2, 3, 3);
        const float a = coef(rng), b = coef(rng);
        FeatureMap mix(3, 7, 5);
        for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = a * x1.data()[i] + b * x2.data()[i];
        const auto pad1 = PaddingSpec::same(3);
        const auto y = conv2d_direct(mix, f, pad1);
        const auto y1 = conv2d_direct(x1, f, pad1), y2 = conv2d_direct(x2, f, pad1);
        std::vector<double> expect(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) expect[i] = a * double(y1.data()[i]) + b * double(y2.data()[i]);
        EXPECT_LT(oracle::rel_error(y.values(), expect), 1e-4);
        EXPECT_EQ(y.channels(), 2u);
        EXPECT_EQ(y.height(), 7u);
        EXPECT_EQ(y.width(), 5u);
    }
}

TEST(MacCount, Formula) {
    EXPECT_EQ(mac_count_regular(2, 3, 4, 4, 3), 1728u);
    EXPECT_EQ(mac_count_regular(1, 1, 1, 1, 1), 2u);
}

TEST(MacCount, InstrumentedMatchesFormula) {
    std::mt19937_64 rng(1);
    OpCounter ops;
    conv2d_direct(oracle::random_map(rng, 2, 4, 4), oracle::random_filters(rng, 3, 2, 3), PaddingSpec::same(3), ops);
    EXPECT_EQ(ops.flops(), 1728u);
    EXPECT_EQ(ops.adds, ops.muls);
    for (std::size_t k : {1u, 3u, 5u}) {
        OpCounter c;
        conv2d_direct(oracle::random_map(rng, 4, 5, 7), oracle::random_filters(rng, 2, 4, k), PaddingSpec::same(k), c);
        EXPECT_EQ(c.flops(), mac_count_regular(4, 2, 5, 7, k)) << "K=" << k;
    }
}
