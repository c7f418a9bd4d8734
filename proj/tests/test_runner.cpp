#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "haste/report.hpp"
#include "haste/runner.hpp"
#include "oracles.hpp"
#include "toy_models.hpp"

using namespace haste;

namespace {

RunSettings haste_settings(unsigned L, std::vector<std::uint64_t> seeds = {0, 1, 2}) {
    RunSettings s;
    s.mode = Mode::haste;
    s.hyperplanes = L;
    s.seeds = std::move(seeds);
    return s;
}

std::size_t haste_layers(const EvalReport& r) {
    return static_cast<std::size_t>(std::count_if(r.layers.begin(), r.layers.end(), [](auto& l) { return l.haste; }));
}

} // namespace

TEST(Forward, ConvReluMatchesOracle) {
    const auto g = toy::one_conv(3, 7);
    const auto d = toy::random_data(1, 3, 7, 4);
    const auto r = forward(g, d.images[0], nullptr, true);
    const auto ref = oracle::conv_same(d.images[0], g.layers[0].conv->weight);
    const auto& act = r.activations[1];
    for (std::size_t o = 0; o < 8; ++o)
        for (std::size_t j = 0; j < 49; ++j) {
            const double want = std::max(0.0, ref[o * 49 + j] + g.layers[0].conv->bias[o]);
            EXPECT_NEAR(act.channel(o)[j], want, 1e-5);
        }
}

TEST(Forward, ElementwiseLayers) {
    using K = LayerKind;
    ModelGraph g;
    g.input = {1, 2, 4};
    Layer bn = toy::simple(K::batchnorm);
    bn.bn = BatchNormParams{1, 0.0, {2.0f}, {1.0f}, {1.0f}, {4.0f}};
    Layer lin = toy::simple(K::linear);
    lin.linear = LinearParams{2, 1, {1.0f, -1.0f}, {0.5f}};
    g.layers = {bn, toy::simple(K::residual_begin), toy::simple(K::relu), toy::simple(K::residual_add),
                toy::simple(K::maxpool2), toy::simple(K::flatten), lin};
    const FeatureMap x(1, 2, 4, {1, 3, -5, 9, 5, 7, 1, 1});
    const auto r = forward(g, x, nullptr, true);
    // bn: (v - 1) / 2 * 2 + 1 = v
    EXPECT_EQ(r.activations[0], x);
    // v + relu(v)
    EXPECT_EQ(r.activations[3], FeatureMap(1, 2, 4, {2, 6, -5, 18, 10, 14, 2, 2}));
    EXPECT_EQ(r.activations[4], FeatureMap(1, 1, 2, {14, 18}));
    EXPECT_EQ(r.activations[5], FeatureMap(2, 1, 1, {14, 18}));
    EXPECT_FLOAT_EQ(r.output(0, 0, 0), 14 - 18 + 0.5f);
}

TEST(Forward, GlobalAvgPool) {
    ModelGraph g;
    g.input = {2, 2, 2};
    g.layers = {toy::simple(LayerKind::global_avgpool)};
    const auto r = forward(g, FeatureMap(2, 2, 2, {1, 2, 3, 4, -1, -1, -1, -5}));
    EXPECT_EQ(r.output, FeatureMap(2, 1, 1, {2.5f, -2.0f}));
}

TEST(Forward, WrongInputShapeIsValidationError) {
    const auto g = toy::one_conv(3, 7);
    EXPECT_THROW(forward(g, FeatureMap(2, 7, 7)), ValidationError);
}

TEST(SwapHaste, BeyondLastConvIsNoOp) {
    const auto g = toy::three_conv();
    const auto s = swap_haste(g, 3);
    for (const auto& l : s.layers) EXPECT_FALSE(l.use_haste);
    auto settings = haste_settings(16);
    settings.start_layer = 3;
    const auto rep = evaluate(g, toy::random_data(6, 3, 12, 5), settings);
    EXPECT_EQ(haste_layers(rep), 0u);
    EXPECT_EQ(rep.network.flops_reduction_mean, 0.0);
}

TEST(SwapHaste, StartZeroSwapsEveryConv) {
    const auto g = toy::three_conv();
    const auto rep = evaluate(g, toy::random_data(4, 3, 12, 5), haste_settings(16));
    EXPECT_EQ(haste_layers(rep), 3u);
    EXPECT_EQ(rep.layers.size(), 4u); // 3 conv + linear
}

TEST(SwapHaste, StartCountsConvOrdinals) {
    const auto s = swap_haste(toy::three_conv(), 1);
    EXPECT_FALSE(s.layers[0].use_haste);
    EXPECT_TRUE(s.layers[4].use_haste);
    EXPECT_TRUE(s.layers[6].use_haste);
}

TEST(SwapHaste, IneligibleConvStaysDirect) {
    auto g = toy::three_conv();
    g.layers[4].conv->haste_eligible = false;
    const auto s = swap_haste(g, 0);
    EXPECT_TRUE(s.layers[0].use_haste);
    EXPECT_FALSE(s.layers[4].use_haste);
}

TEST(SwapHaste, ShapesUnchangedAtEveryLayer) {
    const auto g = toy::three_conv();
    const auto s = swap_haste(g, 0);
    const auto plan = make_plan(s, haste_settings(4), 0);
    const auto x = toy::random_data(1, 3, 12, 5).images[0];
    const auto a = forward(s, x, nullptr, true);
    const auto b = forward(s, x, &plan, true);
    const auto shapes = g.shapes();
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        EXPECT_EQ(b.activations[i].channels(), a.activations[i].channels());
        EXPECT_EQ(b.activations[i].height(), shapes[i].h);
        EXPECT_EQ(b.activations[i].width(), shapes[i].w);
    }
}

TEST(Evaluate, BaselineIsSeedIndependent) {
    RunSettings s;
    s.mode = Mode::baseline;
    const auto rep = evaluate(toy::three_conv(), toy::random_data(20, 3, 12, 5), s);
    ASSERT_EQ(rep.network.accuracy_per_seed.size(), 3u);
    EXPECT_EQ(rep.network.accuracy_std, 0.0);
    EXPECT_EQ(rep.network.flops_reduction_mean, 0.0);
}

TEST(Evaluate, ThreeSeedsGiveThreeRows) {
    const auto rep = evaluate(toy::three_conv(), toy::random_data(8, 3, 12, 5), haste_settings(16));
    EXPECT_EQ(rep.network.accuracy_per_seed.size(), 3u);
    EXPECT_EQ(rep.network.flops_reduction_per_seed.size(), 3u);
    const auto& a = rep.network.accuracy_per_seed;
    EXPECT_DOUBLE_EQ(rep.network.accuracy_mean, (a[0] + a[1] + a[2]) / 3.0);
    const double m = rep.network.accuracy_mean;
    const double var = ((a[0] - m) * (a[0] - m) + (a[1] - m) * (a[1] - m) + (a[2] - m) * (a[2] - m)) / 2.0;
    EXPECT_NEAR(rep.network.accuracy_std, std::sqrt(var), 1e-12);
}

TEST(Evaluate, ReductionRecomputableFromLayers) {
    const auto rep = evaluate(toy::three_conv(), toy::random_data(8, 3, 12, 5), haste_settings(8));
    double base = 0.0, used = 0.0;
    for (const auto& l : rep.layers) {
        base += static_cast<double>(l.flops_baseline);
        used += l.flops_analytic;
    }
    EXPECT_NEAR(100.0 * (1.0 - used / base), rep.network.flops_reduction_mean, 0.01);
    const auto j = to_json(rep);
    double jb = 0.0, ju = 0.0;
    for (const auto& l : j["layers"]) {
        jb += l["flops_baseline"].get<double>();
        ju += l["flops_analytic"].get<double>();
    }
    EXPECT_NEAR(100.0 * (1.0 - ju / jb), j["network"]["flops_reduction_mean"].get<double>(), 0.01);
}

TEST(Evaluate, DuplicatedChannelsKeepAccuracy) {
    // 12 input channels copying 3 base channels: the only conv sees exact duplicates
    const auto g = toy::one_conv(12, 9, 4, 32);
    const auto d = toy::duplicated_data(40, 12, 3, 9, 4);
    RunSettings base;
    base.mode = Mode::baseline;
    const auto b = evaluate(g, d, base);
    const auto h = evaluate(g, d, haste_settings(16));
    EXPECT_GT(h.network.flops_reduction_mean, 0.0);
    EXPECT_EQ(h.network.accuracy_per_seed, b.network.accuracy_per_seed);
    EXPECT_GE(h.layers[0].mean_r, 0.75 - 1e-12);
}

TEST(Evaluate, DatasetOrderDoesNotMatter) {
    const auto g = toy::three_conv();
    auto d = toy::random_data(12, 3, 12, 5);
    for (Mode m : {Mode::haste, Mode::random}) {
        auto s = haste_settings(6, {5});
        s.mode = m;
        const auto a = evaluate(g, d, s);
        auto p = d;
        std::reverse(p.images.begin(), p.images.end());
        std::reverse(p.labels.begin(), p.labels.end());
        const auto b = evaluate(g, p, s);
        EXPECT_EQ(a.network.accuracy_mean, b.network.accuracy_mean);
        for (std::size_t i = 0; i < a.layers.size(); ++i) EXPECT_EQ(a.layers[i].mean_r, b.layers[i].mean_r);
    }
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
    const auto g = toy::three_conv();
    const auto d = toy::random_data(10, 3, 12, 5);
    ::setenv("HASTE_THREADS", "1", 1);
    const auto a = to_json(evaluate(g, d, haste_settings(8)));
    ::setenv("HASTE_THREADS", "4", 1);
    const auto b = to_json(evaluate(g, d, haste_settings(8)));
    ::unsetenv("HASTE_THREADS");
    EXPECT_EQ(a, b);
}

TEST(Evaluate, RandomModeMatchesLshCensusOnFirstLayer) {
    const auto g = toy::three_conv();
    const auto d = toy::random_data(6, 3, 12, 5);
    auto s = haste_settings(6, {1, 2});
    const auto lsh = evaluate(g, d, s, true);
    s.mode = Mode::random;
    const auto rnd = evaluate(g, d, s, true);
    ASSERT_EQ(lsh.patch_census.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(lsh.patch_census[k][0], rnd.patch_census[k][0]);
}

TEST(Evaluate, ShapeMismatchIsValidationError) {
    EXPECT_THROW(evaluate(toy::three_conv(), toy::random_data(2, 4, 12, 5), haste_settings(8)), ValidationError);
}

TEST(Evaluate, InvalidSettings) {
    auto s = haste_settings(0);
    EXPECT_THROW(evaluate(toy::three_conv(), toy::random_data(2, 3, 12, 5), s), ConfigError);
    s = haste_settings(8, {});
    EXPECT_THROW(evaluate(toy::three_conv(), toy::random_data(2, 3, 12, 5), s), ConfigError);
}

TEST(Compare, DuplicatedChannelsAreExact) {
    const auto g = toy::one_conv(12, 9, 4);
    const auto d = toy::duplicated_data(3, 12, 3, 9, 4);
    const auto deltas = compare(g, d, haste_settings(40), 3);
    ASSERT_EQ(deltas.size(), g.layers.size());
    EXPECT_TRUE(deltas[0].haste);
    EXPECT_GT(deltas[0].mean_r, 0.0);
    for (const auto& x : deltas) EXPECT_LT(x.max_rel, 1e-4) << "layer " << x.index;
}

TEST(Compare, SmallLProducesNonzeroDeltas) {
    const auto deltas = compare(toy::three_conv(), toy::random_data(1, 3, 12, 5), haste_settings(2));
    EXPECT_GT(deltas[0].max_abs, 0.0);
    EXPECT_EQ(deltas[1].haste, false);
}

TEST(Report, CsvFormatting) {
    EvalReport r;
    r.settings = haste_settings(8);
    LayerReport l;
    l.index = 2;
    l.haste = true;
    l.mean_r = 0.25;
    l.flops_baseline = 1000;
    l.flops_analytic = 800;
    l.flops_measured = 790;
    l.reduction_pct = 20;
    r.layers = {l};
    r.network.flops_reduction_mean = 20;
    r.network.accuracy_mean = 87.5;
    r.network.accuracy_std = 1.25;
    EXPECT_EQ(to_csv(r),
              "index,kind,haste,mean_r,mean_m,flops_baseline,flops_analytic,flops_measured,reduction_pct,"
              "accuracy_mean,accuracy_std\n"
              "2,conv,1,0.250000,0.000000,1000,800.00,790.00,20.00,,\n"
              "network,total,,,,1000,800.00,790.00,20.00,87.50,1.25\n");
}

TEST(Report, FixedNeverPrintsNegativeZero) {
    EXPECT_EQ(fixed(-0.001, 2), "0.00");
    EXPECT_EQ(fixed(-0.006, 2), "-0.01");
    EXPECT_EQ(fixed(12.345678, 4), "12.3457");
}

TEST(Report, SampleStd) {
    EXPECT_EQ(stddev_of({5.0}), 0.0);
    EXPECT_DOUBLE_EQ(stddev_of({1.0, 3.0}), std::sqrt(2.0));
}
