#ifndef HASTE_FLOPS_HPP
#define HASTE_FLOPS_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "haste/tensor.hpp"

namespace haste {

// One FLOP is one addition or one multiplication (division counts as a
// multiplication). Comparisons, index arithmetic and code packing are free.

inline std::uint64_t flops_round(double v) noexcept { return static_cast<std::uint64_t>(std::llround(v)); }

/// Patch side used throughout: K + 2g.
constexpr std::uint64_t patch_side(std::uint64_t k, std::uint64_t g) noexcept { return k + 2 * g; }

constexpr std::uint64_t flops_centering(std::uint64_t patches, std::uint64_t c_in, std::uint64_t k,
                                        std::uint64_t g) noexcept {
    const std::uint64_t p = patch_side(k, g);
    return 2 * patches * c_in * p * p;
}

inline std::uint64_t flops_hashing(std::uint64_t patches, std::uint64_t c_in, std::uint64_t hyperplanes,
                                   std::uint64_t k, std::uint64_t g, double sparsity) noexcept {
    const double p = static_cast<double>(patch_side(k, g));
    return flops_round(static_cast<double>(patches) * static_cast<double>(c_in) *
                       static_cast<double>(hyperplanes) * p * p * (1.0 - sparsity));
}

inline std::uint64_t flops_merge_fms(std::uint64_t patches, std::uint64_t c_in, std::uint64_t k, std::uint64_t g,
                                     double r, double m) noexcept {
    const double p = static_cast<double>(patch_side(k, g));
    return flops_round(static_cast<double>(patches) * p * p * (static_cast<double>(c_in) * r + m));
}

inline std::uint64_t flops_merge_filters(std::uint64_t patches, std::uint64_t c_out, std::uint64_t c_in, double r,
                                         std::uint64_t k) noexcept {
    return flops_round(static_cast<double>(patches) * static_cast<double>(c_out) * static_cast<double>(c_in) * r *
                       static_cast<double>(k * k));
}

inline std::uint64_t flops_reduced_conv(std::uint64_t h, std::uint64_t w, std::uint64_t k, std::uint64_t c_in,
                                        double r, std::uint64_t c_out) noexcept {
    return flops_round(2.0 * static_cast<double>(h * w * k * k * c_in) * (1.0 - r) * static_cast<double>(c_out));
}

struct FlopsComponents {
    std::uint64_t centering = 0;
    std::uint64_t hashing = 0;
    std::uint64_t merge_fms = 0;
    std::uint64_t merge_filters = 0;
    std::uint64_t reduced_conv = 0;

    std::uint64_t total() const noexcept { return centering + hashing + merge_fms + merge_filters + reduced_conv; }

    FlopsComponents& operator+=(const FlopsComponents& o) noexcept {
        centering += o.centering;
        hashing += o.hashing;
        merge_fms += o.merge_fms;
        merge_filters += o.merge_filters;
        reduced_conv += o.reduced_conv;
        return *this;
    }
    friend bool operator==(const FlopsComponents&, const FlopsComponents&) = default;
};

struct LedgerTotal {
    std::uint64_t total = 0;
    /// 1 - total / baseline; negative when the module costs more than the baseline.
    double reduction = 0.0;
};

inline LedgerTotal ledger_total(const FlopsComponents& c, std::uint64_t regular_baseline) {
    if (regular_baseline == 0) throw ConfigError("ledger_total: baseline must be positive");
    const std::uint64_t t = c.total();
    return {t, 1.0 - static_cast<double>(t) / static_cast<double>(regular_baseline)};
}

/// Census of one patch after grouping.
struct PatchCensus {
    std::uint64_t channels = 0;         // C_in
    std::uint64_t reduced_channels = 0; // occupied buckets
    std::uint64_t merged_buckets = 0;   // buckets holding >= 2 channels
    std::uint64_t valid_outputs = 0;    // output pixels of this patch inside H x W
};

/// Shape of one HASTE layer invocation, enough to evaluate the closed forms.
struct LayerGeometry {
    std::uint64_t c_in = 0, c_out = 0, height = 0, width = 0, kernel = 0, halo = 1;
    unsigned hyperplanes = 0;
    double sparsity = 0.5;
};

/// Exact-mode cost of one patch. Hashing uses the actual number of non-zero
/// hyperplane entries, i.e. the signed additions performed.
inline FlopsComponents patch_flops_exact(const LayerGeometry& g, const PatchCensus& p, std::uint64_t plane_nonzeros) {
    const std::uint64_t side = patch_side(g.kernel, g.halo);
    const std::uint64_t area = side * side;
    const std::uint64_t merged_away = p.channels - p.reduced_channels; // = C_in * r_p
    FlopsComponents c;
    c.centering = 2 * p.channels * area;
    c.hashing = p.channels * plane_nonzeros;
    c.merge_fms = area * (merged_away + p.merged_buckets);
    c.merge_filters = g.c_out * merged_away * g.kernel * g.kernel;
    c.reduced_conv = 2 * p.valid_outputs * g.kernel * g.kernel * p.reduced_channels * g.c_out;
    return c;
}

/// Cost accounting for one HASTE layer, accumulated over any number of
/// forward calls.
///   analytic : exact-mode closed forms summed per patch
///   measured : what the instrumented kernels actually counted
///   averaged(): the closed forms evaluated at mean r and mean m
struct FlopsLedger {
    LayerGeometry geometry;
    FlopsComponents analytic;
    FlopsComponents measured;
    std::uint64_t regular_baseline = 0;
    std::uint64_t patch_count = 0;
    std::uint64_t calls = 0;
    /// Sum over patches of C_in * r_p (channels merged away) and of m_p.
    /// Integer tallies keep the means independent of accumulation order.
    std::uint64_t sum_merged_away = 0;
    std::uint64_t sum_merged_buckets = 0;

    double mean_r() const noexcept {
        return patch_count ? static_cast<double>(sum_merged_away) /
                                 (static_cast<double>(geometry.c_in) * static_cast<double>(patch_count))
                           : 0.0;
    }
    double mean_m() const noexcept {
        return patch_count ? static_cast<double>(sum_merged_buckets) / static_cast<double>(patch_count) : 0.0;
    }

    FlopsComponents averaged() const noexcept {
        const auto& g = geometry;
        const double r = mean_r();
        FlopsComponents c;
        c.centering = flops_centering(patch_count, g.c_in, g.kernel, g.halo);
        c.hashing = flops_hashing(patch_count, g.c_in, g.hyperplanes, g.kernel, g.halo, g.sparsity);
        c.merge_fms = flops_merge_fms(patch_count, g.c_in, g.kernel, g.halo, r, mean_m());
        c.merge_filters = flops_merge_filters(patch_count, g.c_out, g.c_in, r, g.kernel);
        c.reduced_conv = calls * flops_reduced_conv(g.height, g.width, g.kernel, g.c_in, r, g.c_out);
        return c;
    }

    LedgerTotal total() const { return ledger_total(analytic, regular_baseline); }

    /// Merges another ledger of the same layer geometry.
    FlopsLedger& operator+=(const FlopsLedger& o) noexcept {
        if (calls == 0 && patch_count == 0) geometry = o.geometry;
        analytic += o.analytic;
        measured += o.measured;
        regular_baseline += o.regular_baseline;
        patch_count += o.patch_count;
        calls += o.calls;
        sum_merged_away += o.sum_merged_away;
        sum_merged_buckets += o.sum_merged_buckets;
        return *this;
    }
};

} // namespace haste

#endif // HASTE_FLOPS_HPP
