#ifndef HASTE_REPORT_HPP
#define HASTE_REPORT_HPP

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "haste/runner.hpp"

namespace haste {

/// Rounds to a fixed number of decimals for reporting.
inline double round_to(double v, int decimals) {
    const double f = std::pow(10.0, decimals);
    return std::round(v * f) / f;
}

/// Locale-independent fixed-point formatting.
inline std::string fixed(double v, int decimals) {
    if (std::abs(v) < 0.5 * std::pow(10.0, -decimals)) v = 0.0; // no "-0.00"
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline nlohmann::json settings_json(const RunSettings& s) {
    return {{"mode", mode_name(s.mode)}, {"L", s.hyperplanes},      {"s", s.sparsity},
            {"g", s.halo},               {"seeds", s.seeds},        {"start_layer", s.start_layer}};
}

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : r.layers)
        layers.push_back({{"index", l.index},
                          {"kind", kind_name(l.kind)},
                          {"haste", l.haste},
                          {"mean_r", l.mean_r},
                          {"mean_m", l.mean_m},
                          {"flops_baseline", l.flops_baseline},
                          {"flops_analytic", l.flops_analytic},
                          {"flops_measured", l.flops_measured},
                          {"flops_averaged", l.flops_averaged},
                          {"reduction_pct", round_to(l.reduction_pct, 2)}});
    const auto& n = r.network;
    nlohmann::json meta = settings_json(r.settings);
    meta["samples"] = r.samples;
    return {{"meta", meta},
            {"layers", layers},
            {"network",
             {{"accuracy_per_seed", n.accuracy_per_seed},
              {"accuracy_mean", n.accuracy_mean},
              {"accuracy_std", n.accuracy_std},
              {"flops_reduction_per_seed", n.flops_reduction_per_seed},
              {"flops_reduction_mean", round_to(n.flops_reduction_mean, 2)},
              {"flops_reduction_std", round_to(n.flops_reduction_std, 2)}}}};
}

/// Layer table followed by one "network" row.
inline std::string to_csv(const EvalReport& r) {
    std::string out =
        "index,kind,haste,mean_r,mean_m,flops_baseline,flops_analytic,flops_measured,reduction_pct,accuracy_mean,"
        "accuracy_std\n";
    for (const auto& l : r.layers) {
        out += std::to_string(l.index) + "," + kind_name(l.kind) + "," + (l.haste ? "1" : "0") + "," +
               fixed(l.mean_r, 6) + "," + fixed(l.mean_m, 6) + "," + std::to_string(l.flops_baseline) + "," +
               fixed(l.flops_analytic, 2) + "," + fixed(l.flops_measured, 2) + "," + fixed(l.reduction_pct, 2) + ",,\n";
    }
    std::uint64_t base = 0;
    double analytic = 0.0, measured = 0.0;
    for (const auto& l : r.layers) {
        base += l.flops_baseline;
        analytic += l.flops_analytic;
        measured += l.flops_measured;
    }
    out += "network,total,,,," + std::to_string(base) + "," + fixed(analytic, 2) + "," + fixed(measured, 2) + "," +
           fixed(r.network.flops_reduction_mean, 2) + "," +
           fixed(r.network.accuracy_mean, 2) + "," + fixed(r.network.accuracy_std, 2) + "\n";
    return out;
}

struct SweepRow {
    unsigned hyperplanes = 0;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    double flops_reduction_mean = 0.0;
    double mean_r = 0.0; // over all HASTE layers' patches
};

/// Patch-weighted mean r over every HASTE layer in a report.
inline double network_mean_r(const EvalReport& r, const ModelGraph& graph) {
    double merged = 0.0, total = 0.0;
    const auto shapes = graph.shapes();
    for (const auto& l : r.layers) {
        if (!l.haste) continue;
        const auto c_in = graph.layers[l.index].conv->in_channels;
        const auto& s = shapes[l.index];
        const PatchGeometry geo{graph.layers[l.index].conv->kernel, r.settings.halo};
        const auto pad = PaddingSpec::same(geo.kernel);
        const double patches = static_cast<double>(make_grid(s.h, s.w, geo, pad).count());
        merged += l.mean_r * patches * static_cast<double>(c_in);
        total += patches * static_cast<double>(c_in);
    }
    return total > 0 ? merged / total : 0.0;
}

inline SweepRow sweep_row(const EvalReport& r, const ModelGraph& graph) {
    return {r.settings.hyperplanes, r.network.accuracy_mean, r.network.accuracy_std, r.network.flops_reduction_mean,
            network_mean_r(r, graph)};
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "L,accuracy_mean,accuracy_std,flops_reduction_mean,mean_r\n";
    for (const auto& row : rows)
        out += std::to_string(row.hyperplanes) + "," + fixed(row.accuracy_mean, 4) + "," + fixed(row.accuracy_std, 4) +
               "," + fixed(row.flops_reduction_mean, 2) + "," + fixed(row.mean_r, 6) + "\n";
    return out;
}

inline nlohmann::json sweep_json(const RunSettings& s, const std::vector<SweepRow>& rows) {
    nlohmann::json meta = settings_json(s);
    meta.erase("L");
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : rows)
        arr.push_back({{"L", row.hyperplanes},
                       {"accuracy_mean", row.accuracy_mean},
                       {"accuracy_std", row.accuracy_std},
                       {"flops_reduction_mean", round_to(row.flops_reduction_mean, 2)},
                       {"mean_r", row.mean_r}});
    return {{"meta", meta}, {"rows", arr}};
}

inline std::string compare_csv(const std::vector<LayerDelta>& deltas) {
    std::string out = "index,kind,haste,max_abs,mean_abs,max_rel,mean_rel,mean_r\n";
    for (const auto& d : deltas) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%zu,%s,%d,%.6e,%.6e,%.6e,%.6e,%.6f\n", d.index, kind_name(d.kind),
                      d.haste ? 1 : 0, d.max_abs, d.mean_abs, d.max_rel, d.mean_rel, d.mean_r);
        out += buf;
    }
    return out;
}

inline nlohmann::json compare_json(const RunSettings& s, const std::vector<LayerDelta>& deltas) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : deltas)
        arr.push_back({{"index", d.index},
                       {"kind", kind_name(d.kind)},
                       {"haste", d.haste},
                       {"max_abs", d.max_abs},
                       {"mean_abs", d.mean_abs},
                       {"max_rel", d.max_rel},
                       {"mean_rel", d.mean_rel},
                       {"mean_r", d.mean_r}});
    return {{"meta", settings_json(s)}, {"layers", arr}};
}

} // namespace haste

#endif // HASTE_REPORT_HPP
