// Small in-memory models and datasets for runner and CLI tests.
#ifndef HASTE_TESTS_TOY_MODELS_HPP
#define HASTE_TESTS_TOY_MODELS_HPP

#include <random>
#include <vector>

#include "haste/model.hpp"

namespace toy {

inline std::vector<float> normal(std::size_t n, std::mt19937_64& rng, float scale = 1.0f) {
    std::normal_distribution<float> d(0.0f, scale);
    std::vector<float> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

inline haste::Layer conv(std::size_t cin, std::size_t cout, std::mt19937_64& rng, bool bias = true) {
    haste::Layer l;
    l.kind = haste::LayerKind::conv;
    haste::ConvParams p;
    p.in_channels = cin;
    p.out_channels = cout;
    p.kernel = 3;
    p.pad = 1;
    p.weight = haste::FilterBank(cout, cin, 3, normal(cout * cin * 9, rng, 0.4f));
    if (bias) p.bias = normal(cout, rng, 0.1f);
    l.conv = p;
    return l;
}

inline haste::Layer simple(haste::LayerKind k) {
    haste::Layer l;
    l.kind = k;
    return l;
}

inline haste::Layer batchnorm(std::size_t c, std::mt19937_64& rng) {
    haste::Layer l;
    l.kind = haste::LayerKind::batchnorm;
    haste::BatchNormParams p;
    p.channels = c;
    p.scale = normal(c, rng, 0.2f);
    for (auto& s : p.scale) s += 1.0f;
    p.shift = normal(c, rng, 0.1f);
    p.mean = normal(c, rng, 0.1f);
    p.var = std::vector<float>(c, 1.0f);
    l.bn = p;
    return l;
}

inline haste::Layer linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    haste::Layer l;
    l.kind = haste::LayerKind::linear;
    l.linear = haste::LinearParams{in, out, normal(in * out, rng, 0.5f), normal(out, rng, 0.1f)};
    return l;
}

/// conv(c->8)-bn-relu-pool, conv(8->16)-relu, conv(16->16)-relu, gap, linear.
inline haste::ModelGraph three_conv(std::size_t c = 3, std::size_t side = 12, unsigned seed = 1) {
    using K = haste::LayerKind;
    std::mt19937_64 rng(seed);
    haste::ModelGraph g;
    g.input = {c, side, side};
    g.layers = {conv(c, 8, rng),       batchnorm(8, rng),    simple(K::relu), simple(K::maxpool2),
                conv(8, 16, rng),      simple(K::relu),      conv(16, 16, rng), simple(K::relu),
                simple(K::global_avgpool), simple(K::flatten), linear(16, 5, rng)};
    return g;
}

/// Single conv on the input followed by a classifier head.
inline haste::ModelGraph one_conv(std::size_t c, std::size_t side, std::size_t classes = 4, std::size_t width = 8,
                                  unsigned seed = 2) {
    using K = haste::LayerKind;
    std::mt19937_64 rng(seed);
    haste::ModelGraph g;
    g.input = {c, side, side};
    g.layers = {conv(c, width, rng), simple(K::relu), simple(K::global_avgpool), simple(K::flatten),
                linear(width, classes, rng)};
    return g;
}

inline haste::Dataset random_data(std::size_t n, std::size_t c, std::size_t side, std::size_t classes,
                                  unsigned seed = 3) {
    std::mt19937_64 rng(seed);
    haste::Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        d.images.emplace_back(c, side, side, normal(c * side * side, rng));
        d.labels.push_back(static_cast<std::int64_t>(rng() % classes));
    }
    return d;
}

/// Images whose channels are copies of `distinct` base channels, channel i
/// copying base i % distinct.
inline haste::Dataset duplicated_data(std::size_t n, std::size_t c, std::size_t distinct, std::size_t side,
                                      std::size_t classes, unsigned seed = 4) {
    std::mt19937_64 rng(seed);
    haste::Dataset d;
    for (std::size_t k = 0; k < n; ++k) {
        const auto base = normal(distinct * side * side, rng);
        haste::FeatureMap im(c, side, side);
        for (std::size_t i = 0; i < c; ++i) {
            auto dst = im.channel(i);
            std::copy(base.begin() + static_cast<std::ptrdiff_t>((i % distinct) * side * side),
                      base.begin() + static_cast<std::ptrdiff_t>((i % distinct + 1) * side * side), dst.begin());
        }
        d.images.push_back(std::move(im));
        d.labels.push_back(static_cast<std::int64_t>(rng() % classes));
    }
    return d;
}

} // namespace toy

#endif // HASTE_TESTS_TOY_MODELS_HPP
