#ifndef HASTE_MODEL_HPP
#define HASTE_MODEL_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "haste/container.hpp"
#include "haste/error.hpp"
#include "haste/flops.hpp"
#include "haste/tensor.hpp"

namespace haste {

enum class LayerKind { conv, batchnorm, relu, maxpool2, global_avgpool, linear, residual_begin, residual_add, flatten };

inline const char* kind_name(LayerKind k) noexcept {
    switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2: return "maxpool2";
    case LayerKind::global_avgpool: return "global_avgpool";
    case LayerKind::linear: return "linear";
    case LayerKind::residual_begin: return "residual_begin";
    case LayerKind::residual_add: return "residual_add";
    case LayerKind::flatten: return "flatten";
    }
    return "?";
}

inline LayerKind parse_kind(const std::string& s, long index) {
    for (auto k : {LayerKind::conv, LayerKind::batchnorm, LayerKind::relu, LayerKind::maxpool2,
                   LayerKind::global_avgpool, LayerKind::linear, LayerKind::residual_begin, LayerKind::residual_add,
                   LayerKind::flatten})
        if (s == kind_name(k)) return k;
    throw ValidationError("unknown layer kind '" + s + "'", index);
}

struct Shape {
    std::size_t c = 0, h = 0, w = 0;
    friend bool operator==(const Shape&, const Shape&) = default;
    std::string str() const { return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w); }
};

struct ConvParams {
    std::size_t in_channels = 0, out_channels = 0, kernel = 3, pad = 1, stride = 1;
    bool haste_eligible = true;
    FilterBank weight;
    std::vector<float> bias; // empty when the layer has none
};

struct BatchNormParams {
    std::size_t channels = 0;
    double eps = 1e-5;
    std::vector<float> scale, shift, mean, var;
};

struct LinearParams {
    std::size_t in_features = 0, out_features = 0;
    std::vector<float> weight; // [out][in]
    std::vector<float> bias;
};

struct Layer {
    LayerKind kind = LayerKind::relu;
    std::string name;
    std::optional<ConvParams> conv;
    std::optional<BatchNormParams> bn;
    std::optional<LinearParams> linear;
    /// Set by swap_haste; only meaningful for eligible conv layers.
    bool use_haste = false;
};

struct ModelGraph {
    Shape input;
    std::vector<Layer> layers;
    nlohmann::json meta = nlohmann::json::object();

    /// Shape after every layer (validated at load).
    std::vector<Shape> shapes() const;

    std::vector<std::size_t> conv_layers() const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].kind == LayerKind::conv) idx.push_back(i);
        return idx;
    }
};

/// Regular FLOPs of one layer for a single input, given its output shape: the
/// convolution formula for conv layers, 2 * in * out for linear layers, 0 for
/// everything else.
inline std::uint64_t layer_baseline_flops(const Layer& layer, const Shape& out) {
    if (layer.kind == LayerKind::conv)
        return mac_count_regular(layer.conv->in_channels, layer.conv->out_channels, out.h, out.w, layer.conv->kernel);
    if (layer.kind == LayerKind::linear) return 2ull * layer.linear->in_features * layer.linear->out_features;
    return 0;
}

namespace detail {

inline Shape propagate(const Layer& l, const Shape& s, std::vector<Shape>& residual_stack, long i) {
    switch (l.kind) {
    case LayerKind::conv: {
        const auto& p = *l.conv;
        if (p.stride != 1) throw ValidationError("strided convolutions are not supported", i);
        if (p.kernel % 2 == 0) throw ValidationError("kernel size must be odd", i);
        if (s.c != p.in_channels)
            throw ValidationError("conv expects " + std::to_string(p.in_channels) + " input channels, got " +
                                      std::to_string(s.c),
                                  i);
        if (p.haste_eligible && p.pad != (p.kernel - 1) / 2)
            throw ValidationError("HASTE-eligible conv must use same padding", i);
        if (s.h + 2 * p.pad < p.kernel || s.w + 2 * p.pad < p.kernel)
            throw ValidationError("input smaller than kernel", i);
        if (!p.bias.empty() && p.bias.size() != p.out_channels) throw ValidationError("bias length mismatch", i);
        return {p.out_channels, s.h + 2 * p.pad - p.kernel + 1, s.w + 2 * p.pad - p.kernel + 1};
    }
    case LayerKind::batchnorm:
        if (s.c != l.bn->channels) throw ValidationError("batchnorm channel count mismatch", i);
        return s;
    case LayerKind::relu: return s;
    case LayerKind::maxpool2:
        if (s.h < 2 || s.w < 2) throw ValidationError("maxpool2 input smaller than 2x2", i);
        return {s.c, s.h / 2, s.w / 2};
    case LayerKind::global_avgpool: return {s.c, 1, 1};
    case LayerKind::flatten: return {s.c * s.h * s.w, 1, 1};
    case LayerKind::linear:
        if (s.h != 1 || s.w != 1) throw ValidationError("linear layer needs a flattened input, got " + s.str(), i);
        if (s.c != l.linear->in_features)
            throw ValidationError("linear expects " + std::to_string(l.linear->in_features) + " inputs, got " +
                                      std::to_string(s.c),
                                  i);
        return {l.linear->out_features, 1, 1};
    case LayerKind::residual_begin: residual_stack.push_back(s); return s;
    case LayerKind::residual_add:
        if (residual_stack.empty()) throw ValidationError("residual_add without residual_begin", i);
        if (residual_stack.back() != s)
            throw ValidationError("residual branch shape " + s.str() + " != shortcut " + residual_stack.back().str(), i);
        residual_stack.pop_back();
        return s;
    }
    return s;
}

} // namespace detail

inline std::vector<Shape> ModelGraph::shapes() const {
    std::vector<Shape> out;
    out.reserve(layers.size());
    std::vector<Shape> stack;
    Shape s = input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        s = detail::propagate(layers[i], s, stack, static_cast<long>(i));
        out.push_back(s);
    }
    if (!stack.empty()) throw ValidationError("unterminated residual_begin");
    return out;
}

namespace detail {

inline std::vector<float> floats_of(const Container& c, const nlohmann::json& tensors, const char* key,
                                    std::size_t expect, long i) {
    if (!tensors.contains(key)) throw ValidationError(std::string("missing tensor reference '") + key + "'", i);
    const auto& t = c.get(tensors[key].get<std::string>());
    if (t.dtype != DType::float32) throw ValidationError(std::string("tensor '") + key + "' must be float32", i);
    if (t.f32.size() != expect)
        throw ValidationError(std::string("tensor '") + key + "' has " + std::to_string(t.f32.size()) +
                                  " values, expected " + std::to_string(expect),
                              i);
    return t.f32;
}

} // namespace detail

/// Builds and validates a graph from a parsed container.
inline ModelGraph model_from_container(const Container& c) {
    ModelGraph g;
    const auto& m = c.manifest;
    try {
        if (!m.contains("input_shape") || !m.contains("layers")) throw FormatError("manifest is not a model (needs input_shape and layers)");
        const auto in = m["input_shape"].get<std::vector<std::size_t>>();
        if (in.size() != 3 || in[0] == 0 || in[1] == 0 || in[2] == 0) throw ValidationError("input_shape must be [C, H, W]");
        g.input = {in[0], in[1], in[2]};
        if (m.contains("meta")) g.meta = m["meta"];

        long i = 0;
        for (const auto& d : m["layers"]) {
            Layer l;
            l.kind = parse_kind(d.at("kind").get<std::string>(), i);
            l.name = d.value("name", std::string(kind_name(l.kind)) + std::to_string(i));
            const auto tensors = d.value("tensors", nlohmann::json::object());
            switch (l.kind) {
            case LayerKind::conv: {
                ConvParams p;
                p.in_channels = d.at("in_channels").get<std::size_t>();
                p.out_channels = d.at("out_channels").get<std::size_t>();
                p.kernel = d.at("kernel").get<std::size_t>();
                p.pad = d.value("pad", (p.kernel - 1) / 2);
                p.stride = d.value("stride", std::size_t{1});
                p.haste_eligible = d.value("haste_eligible", true);
                if (p.stride != 1) throw ValidationError("strided convolutions are not supported", i);
                if (p.kernel % 2 == 0 || p.in_channels == 0 || p.out_channels == 0)
                    throw ValidationError("bad conv shape", i);
                p.weight = FilterBank(p.out_channels, p.in_channels, p.kernel,
                                      detail::floats_of(c, tensors, "weight",
                                                        p.out_channels * p.in_channels * p.kernel * p.kernel, i));
                if (d.value("bias", false)) p.bias = detail::floats_of(c, tensors, "bias", p.out_channels, i);
                l.conv = std::move(p);
                break;
            }
            case LayerKind::batchnorm: {
                BatchNormParams p;
                p.channels = d.at("channels").get<std::size_t>();
                p.eps = d.value("eps", 1e-5);
                p.scale = detail::floats_of(c, tensors, "weight", p.channels, i);
                p.shift = detail::floats_of(c, tensors, "bias", p.channels, i);
                p.mean = detail::floats_of(c, tensors, "running_mean", p.channels, i);
                p.var = detail::floats_of(c, tensors, "running_var", p.channels, i);
                l.bn = std::move(p);
                break;
            }
            case LayerKind::linear: {
                LinearParams p;
                p.in_features = d.at("in_features").get<std::size_t>();
                p.out_features = d.at("out_features").get<std::size_t>();
                p.weight = detail::floats_of(c, tensors, "weight", p.in_features * p.out_features, i);
                if (d.value("bias", false)) p.bias = detail::floats_of(c, tensors, "bias", p.out_features, i);
                l.linear = std::move(p);
                break;
            }
            default: break;
            }
            g.layers.push_back(std::move(l));
            ++i;
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed layer table: ") + e.what());
    }
    (void)g.shapes();
    return g;
}

inline ModelGraph load_model(std::span<const std::uint8_t> bytes) { return model_from_container(deserialize(bytes)); }
inline ModelGraph load_model(const std::filesystem::path& path) { return load_model(read_file(path)); }

/// Inverse of model_from_container. Tensors are named "<layer index>.<role>".
inline Container model_to_container(const ModelGraph& g) {
    Container c;
    c.manifest["input_shape"] = {g.input.c, g.input.h, g.input.w};
    if (!g.meta.empty()) c.manifest["meta"] = g.meta;
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        const auto& l = g.layers[i];
        const std::string prefix = std::to_string(i) + ".";
        nlohmann::json d{{"kind", kind_name(l.kind)}, {"name", l.name}};
        nlohmann::json tensors = nlohmann::json::object();
        auto add = [&](const char* role, std::vector<std::size_t> shape, const std::vector<float>& v) {
            c.tensors.push_back(TensorRecord::floats(prefix + role, std::move(shape), v));
            tensors[role] = prefix + role;
        };
        if (l.conv) {
            const auto& p = *l.conv;
            d.update({{"in_channels", p.in_channels}, {"out_channels", p.out_channels}, {"kernel", p.kernel},
                      {"pad", p.pad}, {"stride", p.stride}, {"haste_eligible", p.haste_eligible},
                      {"bias", !p.bias.empty()}});
            add("weight", {p.out_channels, p.in_channels, p.kernel, p.kernel}, p.weight.values());
            if (!p.bias.empty()) add("bias", {p.out_channels}, p.bias);
        }
        if (l.bn) {
            const auto& p = *l.bn;
            d.update({{"channels", p.channels}, {"eps", p.eps}});
            add("weight", {p.channels}, p.scale);
            add("bias", {p.channels}, p.shift);
            add("running_mean", {p.channels}, p.mean);
            add("running_var", {p.channels}, p.var);
        }
        if (l.linear) {
            const auto& p = *l.linear;
            d.update({{"in_features", p.in_features}, {"out_features", p.out_features}, {"bias", !p.bias.empty()}});
            add("weight", {p.out_features, p.in_features}, p.weight);
            if (!p.bias.empty()) add("bias", {p.out_features}, p.bias);
        }
        if (!tensors.empty()) d["tensors"] = tensors;
        layers.push_back(std::move(d));
    }
    c.manifest["layers"] = std::move(layers);
    return c;
}

/// Labelled image set: one "images" float32 tensor N x C x H x W and one
/// "labels" int64 tensor of length N.
struct Dataset {
    std::vector<FeatureMap> images;
    std::vector<std::int64_t> labels;
    nlohmann::json meta = nlohmann::json::object();

    std::size_t size() const noexcept { return images.size(); }
};

inline Dataset dataset_from_container(const Container& c) {
    const auto* images = c.find("images");
    const auto* labels = c.find("labels");
    if (!images || !labels) throw FormatError("dataset container needs 'images' and 'labels' tensors");
    if (images->dtype != DType::float32 || images->shape.size() != 4)
        throw ValidationError("'images' must be a float32 N x C x H x W tensor");
    if (labels->dtype != DType::int64 || labels->shape.size() != 1)
        throw ValidationError("'labels' must be an int64 vector");
    const auto& s = images->shape;
    if (labels->shape[0] != s[0])
        throw ValidationError("label count " + std::to_string(labels->shape[0]) + " != image count " +
                              std::to_string(s[0]));
    if (s[1] == 0 || s[2] == 0 || s[3] == 0) throw ValidationError("empty image dimensions");
    Dataset d;
    const std::size_t per = s[1] * s[2] * s[3];
    d.images.reserve(s[0]);
    for (std::size_t n = 0; n < s[0]; ++n)
        d.images.emplace_back(s[1], s[2], s[3],
                              std::vector<float>(images->f32.begin() + static_cast<std::ptrdiff_t>(n * per),
                                                 images->f32.begin() + static_cast<std::ptrdiff_t>((n + 1) * per)));
    d.labels = labels->i64;
    d.meta = c.manifest.value("meta", nlohmann::json::object());
    return d;
}

inline Dataset load_dataset(const std::filesystem::path& path) { return dataset_from_container(load_container(path)); }

inline Container dataset_to_container(const Dataset& d) {
    if (d.images.empty()) throw ConfigError("dataset is empty");
    const auto& f = d.images.front();
    std::vector<float> flat;
    flat.reserve(d.size() * f.size());
    for (const auto& im : d.images) {
        if (im.channels() != f.channels() || im.height() != f.height() || im.width() != f.width())
            throw ConfigError("dataset images differ in shape");
        flat.insert(flat.end(), im.values().begin(), im.values().end());
    }
    Container c;
    if (!d.meta.empty()) c.manifest["meta"] = d.meta;
    c.tensors.push_back(TensorRecord::floats("images", {d.size(), f.channels(), f.height(), f.width()}, std::move(flat)));
    c.tensors.push_back(TensorRecord::ints("labels", {d.labels.size()}, d.labels));
    return c;
}

} // namespace haste

#endif // HASTE_MODEL_HPP
