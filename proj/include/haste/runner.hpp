#ifndef HASTE_RUNNER_HPP
#define HASTE_RUNNER_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "haste/container.hpp"
#include "haste/haste_conv.hpp"
#include "haste/model.hpp"

namespace haste {

enum class Mode { baseline, haste, random };

inline const char* mode_name(Mode m) noexcept {
    switch (m) {
    case Mode::baseline: return "baseline";
    case Mode::haste: return "haste";
    case Mode::random: return "random";
    }
    return "?";
}

inline Mode parse_mode(const std::string& s) {
    if (s == "baseline") return Mode::baseline;
    if (s == "haste" || s == "lsh") return Mode::haste;
    if (s == "random") return Mode::random;
    throw ConfigError("unknown mode '" + s + "' (expected baseline, haste or random)");
}

struct RunSettings {
    Mode mode = Mode::haste;
    unsigned hyperplanes = 16;
    double sparsity = 0.5;
    std::size_t halo = 1;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    /// Ordinal among the graph's conv layers (0 = first conv).
    std::size_t start_layer = 0;
    Centering centering = Centering::channel_mean_vector;

    void validate() const {
        if (seeds.empty()) throw ConfigError("at least one seed is required");
        if (mode == Mode::baseline) return;
        HashConfig{hyperplanes, sparsity, 1, 0}.validate();
        if (halo < 1) throw ConfigError("halo must be >= 1");
    }
};

/// Marks every HASTE-eligible conv whose conv ordinal is >= start_layer.
inline ModelGraph swap_haste(ModelGraph graph, std::size_t start_layer) {
    std::size_t ordinal = 0;
    for (auto& l : graph.layers) {
        if (l.kind != LayerKind::conv) continue;
        l.use_haste = l.conv->haste_eligible && ordinal >= start_layer;
        ++ordinal;
    }
    return graph;
}

/// Per-seed execution state: one hyperplane set per HASTE layer.
struct ExecPlan {
    std::uint64_t seed = 0;
    HasteConfig config;
    std::vector<std::optional<HyperplaneSet>> planes; // indexed by layer
};

inline constexpr std::uint64_t random_selection_tag = 0x52414E444F4D5345ull;

inline ExecPlan make_plan(const ModelGraph& graph, const RunSettings& s, std::uint64_t seed) {
    ExecPlan p;
    p.seed = seed;
    p.config.halo = s.halo;
    p.config.selection = s.mode == Mode::random ? Selection::random : Selection::lsh;
    p.config.centering = s.centering;
    p.planes.resize(graph.layers.size());
    for (std::size_t i = 0; i < graph.layers.size(); ++i) {
        const auto& l = graph.layers[i];
        if (l.kind != LayerKind::conv || !l.use_haste) continue;
        p.planes[i].emplace(hash_config_for(l.conv->kernel, s.halo, s.hyperplanes, s.sparsity, derive_seed(seed, i)));
    }
    return p;
}

struct ForwardResult {
    FeatureMap output;
    std::vector<std::optional<FlopsLedger>> ledgers; // HASTE layers only
    std::vector<std::vector<PatchStats>> patches;    // HASTE layers only
    std::vector<FeatureMap> activations;             // filled on request
};

namespace detail {

inline void add_bias(FeatureMap& m, const std::vector<float>& bias) {
    if (bias.empty()) return;
    for (std::size_t c = 0; c < m.channels(); ++c)
        for (auto& v : m.channel(c)) v += bias[c];
}

inline std::uint32_t image_key(const FeatureMap& x) {
    const auto v = x.values();
    return crc32_of({reinterpret_cast<const std::uint8_t*>(v.data()), v.size() * sizeof(float)});
}

} // namespace detail

/// Runs one image through the graph. With no plan every conv runs directly.
/// In random mode the per-patch permutations are seeded by (seed, layer,
/// image content), so results do not depend on dataset order.
inline ForwardResult forward(const ModelGraph& graph, const FeatureMap& input, const ExecPlan* plan = nullptr,
                             bool keep_activations = false) {
    if (input.channels() != graph.input.c || input.height() != graph.input.h || input.width() != graph.input.w)
        throw ValidationError("input shape " + Shape{input.channels(), input.height(), input.width()}.str() +
                              " does not match model input " + graph.input.str());
    ForwardResult r;
    r.ledgers.resize(graph.layers.size());
    r.patches.resize(graph.layers.size());
    std::vector<FeatureMap> stack;
    FeatureMap x = input;
    const std::uint32_t key = plan && plan->config.selection == Selection::random ? detail::image_key(input) : 0;

    for (std::size_t i = 0; i < graph.layers.size(); ++i) {
        const Layer& l = graph.layers[i];
        switch (l.kind) {
        case LayerKind::conv: {
            const auto& p = *l.conv;
            if (plan && plan->planes[i]) {
                HasteConfig cfg = plan->config;
                cfg.random_seed = derive_seed(derive_seed(plan->seed ^ random_selection_tag, i), key);
                auto res = haste_forward(x, p.weight, cfg, *plan->planes[i]);
                x = std::move(res.output);
                r.ledgers[i] = std::move(res.ledger);
                r.patches[i] = std::move(res.patches);
            } else {
                x = conv2d_direct(x, p.weight, PaddingSpec::uniform(p.pad));
            }
            detail::add_bias(x, p.bias);
            break;
        }
        case LayerKind::batchnorm: {
            const auto& p = *l.bn;
            for (std::size_t c = 0; c < x.channels(); ++c) {
                const float inv = static_cast<float>(1.0 / std::sqrt(static_cast<double>(p.var[c]) + p.eps));
                for (auto& v : x.channel(c)) v = (v - p.mean[c]) * inv * p.scale[c] + p.shift[c];
            }
            break;
        }
        case LayerKind::relu:
            for (auto& v : x.data()) v = std::max(v, 0.0f);
            break;
        case LayerKind::maxpool2: {
            FeatureMap y(x.channels(), x.height() / 2, x.width() / 2);
            for (std::size_t c = 0; c < y.channels(); ++c)
                for (std::size_t a = 0; a < y.height(); ++a)
                    for (std::size_t b = 0; b < y.width(); ++b)
                        y(c, a, b) = std::max({x(c, 2 * a, 2 * b), x(c, 2 * a, 2 * b + 1), x(c, 2 * a + 1, 2 * b),
                                               x(c, 2 * a + 1, 2 * b + 1)});
            x = std::move(y);
            break;
        }
        case LayerKind::global_avgpool: {
            FeatureMap y(x.channels(), 1, 1);
            for (std::size_t c = 0; c < x.channels(); ++c) {
                double sum = 0.0;
                for (float v : x.channel(c)) sum += v;
                y(c, 0, 0) = static_cast<float>(sum / static_cast<double>(x.height() * x.width()));
            }
            x = std::move(y);
            break;
        }
        case LayerKind::flatten: x = FeatureMap(x.size(), 1, 1, x.values()); break;
        case LayerKind::linear: {
            const auto& p = *l.linear;
            FeatureMap y(p.out_features, 1, 1);
            const auto in = x.values();
            for (std::size_t o = 0; o < p.out_features; ++o) {
                double acc = p.bias.empty() ? 0.0 : p.bias[o];
                for (std::size_t j = 0; j < p.in_features; ++j)
                    acc += static_cast<double>(p.weight[o * p.in_features + j]) * in[j];
                y(o, 0, 0) = static_cast<float>(acc);
            }
            x = std::move(y);
            break;
        }
        case LayerKind::residual_begin: stack.push_back(x); break;
        case LayerKind::residual_add: {
            const auto skip = stack.back().values();
            stack.pop_back();
            auto d = x.data();
            for (std::size_t j = 0; j < d.size(); ++j) d[j] += skip[j];
            break;
        }
        }
        if (keep_activations) r.activations.push_back(x);
    }
    r.output = std::move(x);
    return r;
}

/// Index of the largest logit; ties go to the lower index.
inline std::size_t argmax(const FeatureMap& logits) {
    const auto v = logits.values();
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// Worker count: HASTE_THREADS if set and > 0, otherwise the hardware count.
inline std::size_t worker_count(std::size_t jobs) {
    std::size_t n = 0;
    if (const char* env = std::getenv("HASTE_THREADS")) n = static_cast<std::size_t>(std::strtoull(env, nullptr, 10));
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, std::min(n, jobs));
}

/// Calls fn(i) for i in [0, n) on a small pool; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = worker_count(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    pool.clear();
    if (error) std::rethrow_exception(error);
}

struct LayerReport {
    std::size_t index = 0;
    LayerKind kind = LayerKind::conv;
    bool haste = false;
    double mean_r = 0.0;
    double mean_m = 0.0;
    std::uint64_t flops_baseline = 0; // per image
    double flops_analytic = 0.0;      // per image, mean over seeds
    double flops_measured = 0.0;
    double flops_averaged = 0.0;
    double reduction_pct = 0.0;
};

struct NetworkReport {
    std::vector<double> accuracy_per_seed; // percent
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    std::vector<double> flops_reduction_per_seed; // percent
    double flops_reduction_mean = 0.0;
    double flops_reduction_std = 0.0;
};

struct EvalReport {
    RunSettings settings;
    std::size_t samples = 0;
    std::vector<LayerReport> layers; // conv and linear layers
    NetworkReport network;
    /// [seed][layer] -> reduced channel count of every patch, image-major.
    /// Only filled when requested.
    std::vector<std::vector<std::vector<std::uint32_t>>> patch_census;
};

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1); 0 for fewer than two values.
inline double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline void check_dataset(const ModelGraph& graph, const Dataset& data) {
    if (data.images.empty()) throw ValidationError("dataset is empty");
    if (data.labels.size() != data.images.size()) throw ValidationError("labels and images differ in count");
    for (std::size_t n = 0; n < data.images.size(); ++n) {
        const auto& im = data.images[n];
        if (im.channels() != graph.input.c || im.height() != graph.input.h || im.width() != graph.input.w)
            throw ValidationError("image " + std::to_string(n) + " has shape " +
                                  Shape{im.channels(), im.height(), im.width()}.str() + ", model expects " +
                                  graph.input.str());
    }
}

/// Top-1 accuracy and per-layer FLOPs over the dataset, once per seed.
inline EvalReport evaluate(const ModelGraph& model, const Dataset& data, const RunSettings& settings,
                           bool keep_census = false) {
    settings.validate();
    const auto shapes = model.shapes();
    check_dataset(model, data);
    const ModelGraph graph =
        settings.mode == Mode::baseline ? swap_haste(model, model.layers.size() + 1) : swap_haste(model, settings.start_layer);

    const std::size_t n_images = data.size();
    const std::size_t n_layers = graph.layers.size();
    EvalReport rep;
    rep.settings = settings;
    rep.samples = n_images;

    std::vector<std::uint64_t> baseline(n_layers);
    std::uint64_t baseline_total = 0;
    for (std::size_t i = 0; i < n_layers; ++i) {
        baseline[i] = layer_baseline_flops(graph.layers[i], shapes[i]);
        baseline_total += baseline[i];
    }

    std::vector<FlopsLedger> combined(n_layers);
    std::vector<char> is_haste(n_layers, 0);
    for (std::size_t i = 0; i < n_layers; ++i) is_haste[i] = graph.layers[i].kind == LayerKind::conv && graph.layers[i].use_haste;

    for (const std::uint64_t seed : settings.seeds) {
        const ExecPlan plan = make_plan(graph, settings, seed);
        std::vector<char> correct(n_images, 0);
        std::vector<std::vector<std::optional<FlopsLedger>>> ledgers(n_images);
        std::vector<std::vector<std::vector<PatchStats>>> patches(n_images);
        parallel_for(n_images, [&](std::size_t n) {
            auto r = forward(graph, data.images[n], settings.mode == Mode::baseline ? nullptr : &plan);
            correct[n] = static_cast<std::int64_t>(argmax(r.output)) == data.labels[n];
            ledgers[n] = std::move(r.ledgers);
            if (keep_census) patches[n] = std::move(r.patches);
        });
        if (keep_census) {
            std::vector<std::vector<std::uint32_t>> per_layer(n_layers);
            for (std::size_t n = 0; n < n_images; ++n)
                for (std::size_t i = 0; i < n_layers; ++i)
                    for (const auto& p : patches[n][i]) per_layer[i].push_back(p.reduced_channels);
            rep.patch_census.push_back(std::move(per_layer));
        }

        std::size_t hits = 0;
        for (char c : correct) hits += c ? 1 : 0;
        rep.network.accuracy_per_seed.push_back(100.0 * static_cast<double>(hits) / static_cast<double>(n_images));

        double seed_total = 0.0;
        for (std::size_t i = 0; i < n_layers; ++i) {
            if (!is_haste[i]) {
                seed_total += static_cast<double>(baseline[i]);
                continue;
            }
            FlopsLedger sum;
            for (std::size_t n = 0; n < n_images; ++n) sum += *ledgers[n][i];
            seed_total += static_cast<double>(sum.analytic.total()) / static_cast<double>(n_images);
            combined[i] += sum;
        }
        rep.network.flops_reduction_per_seed.push_back(
            baseline_total ? 100.0 * (1.0 - seed_total / static_cast<double>(baseline_total)) : 0.0);
    }

    for (std::size_t i = 0; i < n_layers; ++i) {
        const auto& l = graph.layers[i];
        if (l.kind != LayerKind::conv && l.kind != LayerKind::linear) continue;
        LayerReport lr;
        lr.index = i;
        lr.kind = l.kind;
        lr.haste = is_haste[i];
        lr.flops_baseline = baseline[i];
        if (is_haste[i]) {
            const auto& c = combined[i];
            const double calls = static_cast<double>(c.calls);
            lr.mean_r = c.mean_r();
            lr.mean_m = c.mean_m();
            lr.flops_analytic = static_cast<double>(c.analytic.total()) / calls;
            lr.flops_measured = static_cast<double>(c.measured.total()) / calls;
            lr.flops_averaged = static_cast<double>(c.averaged().total()) / calls;
        } else {
            lr.flops_analytic = lr.flops_measured = lr.flops_averaged = static_cast<double>(baseline[i]);
        }
        lr.reduction_pct = baseline[i] ? 100.0 * (1.0 - lr.flops_analytic / static_cast<double>(baseline[i])) : 0.0;
        rep.layers.push_back(lr);
    }

    auto& net = rep.network;
    net.accuracy_mean = mean_of(net.accuracy_per_seed);
    net.accuracy_std = stddev_of(net.accuracy_per_seed);
    net.flops_reduction_mean = mean_of(net.flops_reduction_per_seed);
    net.flops_reduction_std = stddev_of(net.flops_reduction_per_seed);
    return rep;
}

struct LayerDelta {
    std::size_t index = 0;
    LayerKind kind = LayerKind::conv;
    bool haste = false;
    double max_abs = 0.0;
    double mean_abs = 0.0;
    double max_rel = 0.0;  // max |delta| / max |baseline|, worst image
    double mean_rel = 0.0; // sum |delta| / sum |baseline|
    double mean_r = 0.0;
};

/// Per-layer output deltas between the direct and HASTE paths on the first
/// `max_images` images, using the first seed.
inline std::vector<LayerDelta> compare(const ModelGraph& model, const Dataset& data, const RunSettings& settings,
                                       std::size_t max_images = 1) {
    settings.validate();
    check_dataset(model, data);
    const ModelGraph graph = swap_haste(model, settings.start_layer);
    const ExecPlan plan = make_plan(graph, settings, settings.seeds.front());
    const std::size_t n_images = std::min(std::max<std::size_t>(max_images, 1), data.size());

    std::vector<LayerDelta> out(graph.layers.size());
    std::vector<double> sum_abs(out.size()), sum_base(out.size());
    std::vector<std::size_t> count(out.size());
    std::vector<FlopsLedger> ledgers(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].index = i;
        out[i].kind = graph.layers[i].kind;
        out[i].haste = graph.layers[i].kind == LayerKind::conv && graph.layers[i].use_haste;
    }
    for (std::size_t n = 0; n < n_images; ++n) {
        const auto base = forward(graph, data.images[n], nullptr, true);
        const auto fast = forward(graph, data.images[n], &plan, true);
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto a = base.activations[i].values();
            const auto b = fast.activations[i].values();
            double max_abs = 0.0, max_base = 0.0;
            for (std::size_t j = 0; j < a.size(); ++j) {
                const double d = std::abs(static_cast<double>(b[j]) - a[j]);
                max_abs = std::max(max_abs, d);
                max_base = std::max(max_base, static_cast<double>(std::abs(a[j])));
                sum_abs[i] += d;
                sum_base[i] += std::abs(a[j]);
            }
            count[i] += a.size();
            out[i].max_abs = std::max(out[i].max_abs, max_abs);
            out[i].max_rel = std::max(out[i].max_rel, max_base > 0 ? max_abs / max_base : max_abs);
            if (fast.ledgers[i]) ledgers[i] += *fast.ledgers[i];
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].mean_abs = count[i] ? sum_abs[i] / static_cast<double>(count[i]) : 0.0;
        out[i].mean_rel = sum_base[i] > 0 ? sum_abs[i] / sum_base[i] : sum_abs[i];
        if (out[i].haste) out[i].mean_r = ledgers[i].mean_r();
    }
    return out;
}

} // namespace haste

#endif // HASTE_RUNNER_HPP
