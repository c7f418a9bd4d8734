#ifndef HASTE_PATCH_HPP
#define HASTE_PATCH_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "haste/counter.hpp"
#include "haste/tensor.hpp"

namespace haste {

/// How a layer's padded input is cut into patches.
///
/// The convolution-padded map is tiled by square cores of side 2g+1. Each
/// patch is its core plus a (K-1)/2 margin on every side, so a KxK kernel can
/// be centred on every core pixel without leaving the patch. Patch side is
/// K + 2g; for K = 3, g = 1 this is the usual 5x5 patch with a 3x3 core, and
/// for K = 1, g = 1 it is a non-overlapping 3x3 tiling.
struct PatchGeometry {
    std::size_t kernel = 3;
    std::size_t halo = 1;

    std::size_t core() const noexcept { return 2 * halo + 1; }
    std::size_t margin() const noexcept { return (kernel - 1) / 2; }
    std::size_t side() const noexcept { return kernel + 2 * halo; }
    std::size_t hash_dim() const noexcept { return side() * side(); }

    void validate() const {
        if (kernel == 0 || kernel % 2 == 0) throw ConfigError("PatchGeometry: kernel must be odd and positive");
        if (halo < 1) throw ConfigError("PatchGeometry: halo must be >= 1");
    }
};

/// One rasterized patch. `core_y`/`core_x` give the core origin in the
/// coordinates of the convolution-padded map.
struct Patch {
    std::size_t core_y = 0;
    std::size_t core_x = 0;
    FeatureMap slab; // C_in x side x side
};

struct PatchGrid {
    PatchGeometry geometry;
    std::size_t padded_height = 0; // after convolution padding
    std::size_t padded_width = 0;
    std::size_t rows = 0; // patches along y
    std::size_t cols = 0;

    std::size_t count() const noexcept { return rows * cols; }
};

inline PatchGrid make_grid(std::size_t height, std::size_t width, const PatchGeometry& geo, const PaddingSpec& conv_pad) {
    geo.validate();
    PatchGrid g;
    g.geometry = geo;
    g.padded_height = height + conv_pad.top + conv_pad.bottom;
    g.padded_width = width + conv_pad.left + conv_pad.right;
    const std::size_t t = geo.core();
    g.rows = (g.padded_height + t - 1) / t;
    g.cols = (g.padded_width + t - 1) / t;
    return g;
}

/// The convolution-padded map, grown on the right/bottom to a whole number of
/// cores and surrounded by a zero margin; patch (py, px) is the side x side
/// window at (py * core, px * core) of this canvas.
inline FeatureMap patch_canvas(const FeatureMap& map, const PatchGrid& grid, const PaddingSpec& conv_pad) {
    const auto& geo = grid.geometry;
    const std::size_t m = geo.margin();
    const std::size_t ch = grid.rows * geo.core() + 2 * m;
    const std::size_t cw = grid.cols * geo.core() + 2 * m;
    FeatureMap canvas(map.channels(), ch, cw, 0.0f);
    for (std::size_t c = 0; c < map.channels(); ++c)
        for (std::size_t y = 0; y < map.height(); ++y)
            for (std::size_t x = 0; x < map.width(); ++x)
                canvas(c, y + conv_pad.top + m, x + conv_pad.left + m) = map(c, y, x);
    return canvas;
}

inline Patch extract_patch(const FeatureMap& canvas, const PatchGrid& grid, std::size_t py, std::size_t px) {
    const auto& geo = grid.geometry;
    const std::size_t side = geo.side();
    Patch p;
    p.core_y = py * geo.core();
    p.core_x = px * geo.core();
    p.slab = FeatureMap(canvas.channels(), side, side);
    for (std::size_t c = 0; c < canvas.channels(); ++c)
        for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x)
                p.slab(c, y, x) = canvas(c, p.core_y + y, p.core_x + x);
    return p;
}

struct Rasterization {
    PatchGrid grid;
    std::vector<Patch> patches; // row-major over the grid
};

inline Rasterization rasterize(const FeatureMap& map, const PatchGeometry& geo, const PaddingSpec& conv_pad) {
    Rasterization r;
    r.grid = make_grid(map.height(), map.width(), geo, conv_pad);
    const FeatureMap canvas = patch_canvas(map, r.grid, conv_pad);
    r.patches.reserve(r.grid.count());
    for (std::size_t py = 0; py < r.grid.rows; ++py)
        for (std::size_t px = 0; px < r.grid.cols; ++px)
            r.patches.push_back(extract_patch(canvas, r.grid, py, px));
    return r;
}

/// Flattened channel vectors of one patch, C_in rows of dim side^2.
struct ChannelVectors {
    std::size_t count = 0;
    std::size_t dim = 0;
    std::vector<float> data;

    std::span<const float> row(std::size_t i) const noexcept { return {data.data() + i * dim, dim}; }
    std::span<float> row(std::size_t i) noexcept { return {data.data() + i * dim, dim}; }
};

enum class Centering {
    /// Subtract the coordinate-wise mean over channels (a side^2 vector).
    channel_mean_vector,
    /// Subtract each channel's own scalar mean. Kept for experiments only.
    per_channel_scalar,
};

/// Flattens every channel row-major and centres it. Both modes cost exactly
/// 2 * C_in * side^2 FLOPs: (n-1) additions and one division per mean, plus
/// one subtraction per entry.
template <class Counter = NullCounter>
ChannelVectors flatten_center(const FeatureMap& slab, Centering mode = Centering::channel_mean_vector,
                              Counter&& counter = Counter{}) {
    ChannelVectors v;
    v.count = slab.channels();
    v.dim = slab.height() * slab.width();
    v.data.resize(v.count * v.dim);
    const std::size_t n = v.count, d = v.dim;

    if (mode == Centering::channel_mean_vector) {
        for (std::size_t j = 0; j < d; ++j) {
            double sum = slab.channel(0)[j];
            for (std::size_t i = 1; i < n; ++i) sum += slab.channel(i)[j];
            const double mean = sum / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i)
                v.data[i * d + j] = static_cast<float>(static_cast<double>(slab.channel(i)[j]) - mean);
        }
        counter.add(d * (n - 1) + d * n);
        counter.mul(d);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const auto ch = slab.channel(i);
            double sum = ch[0];
            for (std::size_t j = 1; j < d; ++j) sum += ch[j];
            const double mean = sum / static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j) v.data[i * d + j] = static_cast<float>(static_cast<double>(ch[j]) - mean);
        }
        counter.add(n * (d - 1) + n * d);
        counter.mul(n);
    }
    return v;
}

} // namespace haste

#endif // HASTE_PATCH_HPP
