#ifndef HASTE_HASTE_CONV_HPP
#define HASTE_HASTE_CONV_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "haste/buckets.hpp"
#include "haste/counter.hpp"
#include "haste/flops.hpp"
#include "haste/lsh.hpp"
#include "haste/patch.hpp"
#include "haste/rng.hpp"
#include "haste/tensor.hpp"

namespace haste {

enum class Selection { lsh, random };

struct HasteConfig {
    HashConfig hash;
    std::size_t halo = 1;
    Selection selection = Selection::lsh;
    /// Seeds the per-patch permutations of Selection::random.
    std::uint64_t random_seed = 0;
    Centering centering = Centering::channel_mean_vector;
};

/// Mean of the channels in each group. Singletons are copied; a group of n
/// channels costs (n-1) additions and one division per entry.
template <class Counter = NullCounter>
FeatureMap merge_input(const FeatureMap& slab, const BucketAssignment& a, Counter&& counter = Counter{}) {
    if (a.channels() != slab.channels()) throw ConfigError("merge_input: assignment/patch channel mismatch");
    const std::size_t area = slab.height() * slab.width();
    FeatureMap out(a.reduced_channels(), slab.height(), slab.width());
    for (std::size_t g = 0; g < a.reduced_channels(); ++g) {
        const auto& members = a.groups()[g];
        auto dst = out.channel(g);
        if (members.size() == 1) {
            const auto src = slab.channel(members[0]);
            std::copy(src.begin(), src.end(), dst.begin());
            continue;
        }
        const double n = static_cast<double>(members.size());
        for (std::size_t j = 0; j < area; ++j) {
            double sum = slab.channel(members[0])[j];
            for (std::size_t k = 1; k < members.size(); ++k) sum += slab.channel(members[k])[j];
            dst[j] = static_cast<float>(sum / n);
        }
        counter.add(area * (members.size() - 1));
        counter.mul(area);
    }
    return out;
}

/// Elementwise sum of the filter channels in each group. The input bank is
/// only read.
template <class Counter = NullCounter>
FilterBank merge_filters(const FilterBank& filters, const BucketAssignment& a, Counter&& counter = Counter{}) {
    if (a.channels() != filters.in_channels()) throw ConfigError("merge_filters: assignment/filter channel mismatch");
    const std::size_t kk = filters.kernel() * filters.kernel();
    FilterBank out(filters.out_channels(), a.reduced_channels(), filters.kernel());
    for (std::size_t o = 0; o < filters.out_channels(); ++o) {
        for (std::size_t g = 0; g < a.reduced_channels(); ++g) {
            const auto& members = a.groups()[g];
            auto dst = out.slice(o, g);
            for (std::size_t e = 0; e < kk; ++e) {
                double sum = filters.slice(o, members[0])[e];
                for (std::size_t k = 1; k < members.size(); ++k) sum += filters.slice(o, members[k])[e];
                dst[e] = static_cast<float>(sum);
            }
            counter.add(kk * (members.size() - 1));
        }
    }
    return out;
}

/// Core positions [row_begin, row_end) x [col_begin, col_end) of a patch that
/// map to pixels of the unpadded input.
struct CoreWindow {
    std::size_t row_begin = 0, row_end = 0, col_begin = 0, col_end = 0;
    std::size_t count() const noexcept { return (row_end - row_begin) * (col_end - col_begin); }
};

/// Slides the reduced filters over the core positions of a reduced patch.
/// Returns a C_out x core x core block; positions outside `window` are
/// skipped and left at zero.
template <class Counter = NullCounter>
FeatureMap reduced_conv(const FeatureMap& reduced_patch, const FilterBank& reduced_filters,
                        const PatchGeometry& geo, const CoreWindow& window, Counter&& counter = Counter{}) {
    if (reduced_patch.channels() != reduced_filters.in_channels())
        throw ConfigError("reduced_conv: patch depth != filter depth");
    if (reduced_patch.height() != geo.side() || reduced_patch.width() != geo.side())
        throw ConfigError("reduced_conv: patch side does not match geometry");
    const std::size_t k = reduced_filters.kernel();
    if (k != geo.kernel) throw ConfigError("reduced_conv: kernel does not match geometry");
    const std::size_t depth = reduced_patch.channels();
    const std::size_t t = geo.core();

    FeatureMap out(reduced_filters.out_channels(), t, t, 0.0f);
    for (std::size_t o = 0; o < reduced_filters.out_channels(); ++o) {
        for (std::size_t a = window.row_begin; a < window.row_end; ++a) {
            for (std::size_t b = window.col_begin; b < window.col_end; ++b) {
                double acc = 0.0;
                for (std::size_t i = 0; i < depth; ++i) {
                    const auto w = reduced_filters.slice(o, i);
                    for (std::size_t u = 0; u < k; ++u)
                        for (std::size_t v = 0; v < k; ++v)
                            acc += static_cast<double>(w[u * k + v]) * reduced_patch(i, a + u, b + v);
                }
                out(o, a, b) = static_cast<float>(acc);
            }
        }
    }
    const std::uint64_t macs = window.count() * reduced_filters.out_channels() * depth * k * k;
    counter.mul(macs);
    counter.add(macs);
    return out;
}

/// Per-patch grouping outcome.
struct PatchStats {
    std::uint32_t reduced_channels = 0;
    std::uint32_t merged_buckets = 0;
    double ratio = 0.0;
};

struct HasteResult {
    FeatureMap output;
    std::vector<PatchStats> patches; // row-major over the patch grid
    FlopsLedger ledger;

    double mean_r() const noexcept { return ledger.mean_r(); }
    double mean_m() const noexcept { return ledger.mean_m(); }
};

namespace detail {

inline CoreWindow core_window(const PatchGrid& grid, std::size_t py, std::size_t px, std::size_t height,
                              std::size_t width, const PaddingSpec& pad) {
    // Core pixel at padded coordinate q is the kernel centre for output q - top.
    const std::size_t t = grid.geometry.core();
    auto range = [t](std::size_t origin, std::size_t lead, std::size_t extent, std::size_t& lo, std::size_t& hi) {
        const std::size_t first = lead;         // first padded coordinate with an output
        const std::size_t last = lead + extent; // one past the last
        lo = std::clamp(first, origin, origin + t) - origin;
        hi = std::clamp(last, origin, origin + t) - origin;
        if (hi < lo) hi = lo;
    };
    CoreWindow w;
    range(py * t, pad.top, height, w.row_begin, w.row_end);
    range(px * t, pad.left, width, w.col_begin, w.col_end);
    return w;
}

} // namespace detail

/// HASTE convolution of a same-size, stride-1 layer (bias not included).
/// Hashes every patch's centred channels, merges redundant input channels by
/// mean and the matching filter channels by sum, and convolves the shallower
/// patch. Output shape equals conv2d_direct's.
inline HasteResult haste_forward(const FeatureMap& map, const FilterBank& filters, const HasteConfig& cfg,
                                 const HyperplaneSet& planes) {
    if (map.channels() != filters.in_channels())
        throw ConfigError("haste_forward: input has " + std::to_string(map.channels()) +
                          " channels, filters expect " + std::to_string(filters.in_channels()));
    const PatchGeometry geo{filters.kernel(), cfg.halo};
    geo.validate();
    if (planes.dim() != geo.hash_dim())
        throw ConfigError("haste_forward: hyperplane dimension " + std::to_string(planes.dim()) +
                          " != patch area " + std::to_string(geo.hash_dim()));

    const PaddingSpec pad = PaddingSpec::same(geo.kernel);
    const PatchGrid grid = make_grid(map.height(), map.width(), geo, pad);
    const FeatureMap canvas = patch_canvas(map, grid, pad);
    const std::size_t t = geo.core();
    const std::size_t cin = map.channels();

    HasteResult res;
    res.output = FeatureMap(filters.out_channels(), map.height(), map.width());
    res.patches.reserve(grid.count());

    auto& ledger = res.ledger;
    ledger.geometry = {cin, filters.out_channels(), map.height(), map.width(), geo.kernel, geo.halo,
                       planes.count(), planes.config().sparsity};
    ledger.regular_baseline = mac_count_regular(cin, filters.out_channels(), map.height(), map.width(), geo.kernel);
    ledger.calls = 1;
    const std::uint64_t plane_nnz = planes.total_nonzeros();

    for (std::size_t py = 0; py < grid.rows; ++py) {
        for (std::size_t px = 0; px < grid.cols; ++px) {
            const Patch patch = extract_patch(canvas, grid, py, px);
            const CoreWindow window = detail::core_window(grid, py, px, map.height(), map.width(), pad);

            OpCounter c_center, c_hash, c_fms, c_filt, c_conv;
            const ChannelVectors vecs = flatten_center(patch.slab, cfg.centering, c_center);
            BucketAssignment assignment = assign_buckets(vecs, planes, c_hash);
            if (cfg.selection == Selection::random)
                assignment = assign_random(assignment, derive_seed(cfg.random_seed, py * grid.cols + px));

            const FeatureMap reduced = merge_input(patch.slab, assignment, c_fms);
            const FilterBank rfilters = merge_filters(filters, assignment, c_filt);
            const FeatureMap block = reduced_conv(reduced, rfilters, geo, window, c_conv);

            for (std::size_t o = 0; o < filters.out_channels(); ++o)
                for (std::size_t a = window.row_begin; a < window.row_end; ++a)
                    for (std::size_t b = window.col_begin; b < window.col_end; ++b)
                        res.output(o, py * t + a - pad.top, px * t + b - pad.left) = block(o, a, b);

            const PatchCensus census{cin, assignment.reduced_channels(), assignment.merged_buckets(), window.count()};
            ledger.analytic += patch_flops_exact(ledger.geometry, census, plane_nnz);
            ledger.measured += FlopsComponents{c_center.flops(), c_hash.flops(), c_fms.flops(), c_filt.flops(),
                                               c_conv.flops()};
            ledger.patch_count += 1;
            ledger.sum_merged_away += cin - census.reduced_channels;
            ledger.sum_merged_buckets += census.merged_buckets;
            res.patches.push_back({static_cast<std::uint32_t>(census.reduced_channels),
                                   static_cast<std::uint32_t>(census.merged_buckets), assignment.ratio()});
        }
    }
    return res;
}

/// 1x1 layers: non-overlapping 3x3 patches (g = 1), hashed on 9-dim vectors.
inline HasteResult haste_forward_1x1(const FeatureMap& map, const FilterBank& filters, const HasteConfig& cfg,
                                     const HyperplaneSet& planes) {
    if (filters.kernel() != 1) throw ConfigError("haste_forward_1x1: kernel must be 1");
    return haste_forward(map, filters, cfg, planes);
}

/// Hash configuration matching a layer: d = (K + 2g)^2.
inline HashConfig hash_config_for(std::size_t kernel, std::size_t halo, unsigned hyperplanes, double sparsity,
                                  std::uint64_t seed) {
    const PatchGeometry geo{kernel, halo};
    return HashConfig{hyperplanes, sparsity, geo.hash_dim(), seed};
}

} // namespace haste

#endif // HASTE_HASTE_CONV_HPP
