#ifndef HASTE_TENSOR_HPP
#define HASTE_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "haste/counter.hpp"
#include "haste/error.hpp"

namespace haste {

/// Dense C x H x W activation tensor, channel-major then row-major.
class FeatureMap {
public:
    FeatureMap() = default;

    FeatureMap(std::size_t channels, std::size_t height, std::size_t width, float fill = 0.0f)
        : c_(channels), h_(height), w_(width) {
        check_dims();
        data_.assign(c_ * h_ * w_, fill);
    }

    FeatureMap(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> data)
        : c_(channels), h_(height), w_(width), data_(std::move(data)) {
        check_dims();
        if (data_.size() != c_ * h_ * w_)
            throw ConfigError("FeatureMap: data length " + std::to_string(data_.size()) +
                              " does not match " + std::to_string(c_) + "x" + std::to_string(h_) +
                              "x" + std::to_string(w_));
    }

    std::size_t channels() const noexcept { return c_; }
    std::size_t height() const noexcept { return h_; }
    std::size_t width() const noexcept { return w_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float& operator()(std::size_t c, std::size_t y, std::size_t x) noexcept {
        return data_[(c * h_ + y) * w_ + x];
    }
    float operator()(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[(c * h_ + y) * w_ + x];
    }

    std::span<float> channel(std::size_t c) noexcept { return {data_.data() + c * h_ * w_, h_ * w_}; }
    std::span<const float> channel(std::size_t c) const noexcept {
        return {data_.data() + c * h_ * w_, h_ * w_};
    }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    const std::vector<float>& values() const noexcept { return data_; }

    friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

private:
    void check_dims() const {
        if (c_ == 0 || h_ == 0 || w_ == 0) throw ConfigError("FeatureMap: dimensions must be >= 1");
    }

    std::size_t c_ = 0, h_ = 0, w_ = 0;
    std::vector<float> data_;
};

/// Convolution weights laid out [out][in][K][K]; K is odd.
class FilterBank {
public:
    FilterBank() = default;

    FilterBank(std::size_t out_channels, std::size_t in_channels, std::size_t kernel, float fill = 0.0f)
        : out_(out_channels), in_(in_channels), k_(kernel) {
        check_dims();
        data_.assign(out_ * in_ * k_ * k_, fill);
    }

    FilterBank(std::size_t out_channels, std::size_t in_channels, std::size_t kernel, std::vector<float> data)
        : out_(out_channels), in_(in_channels), k_(kernel), data_(std::move(data)) {
        check_dims();
        if (data_.size() != out_ * in_ * k_ * k_)
            throw ConfigError("FilterBank: data length does not match shape");
    }

    std::size_t out_channels() const noexcept { return out_; }
    std::size_t in_channels() const noexcept { return in_; }
    std::size_t kernel() const noexcept { return k_; }
    std::size_t size() const noexcept { return data_.size(); }

    float& operator()(std::size_t o, std::size_t i, std::size_t u, std::size_t v) noexcept {
        return data_[((o * in_ + i) * k_ + u) * k_ + v];
    }
    float operator()(std::size_t o, std::size_t i, std::size_t u, std::size_t v) const noexcept {
        return data_[((o * in_ + i) * k_ + u) * k_ + v];
    }

    /// The K*K slice of filter `o` acting on input channel `i`.
    std::span<const float> slice(std::size_t o, std::size_t i) const noexcept {
        return {data_.data() + (o * in_ + i) * k_ * k_, k_ * k_};
    }
    std::span<float> slice(std::size_t o, std::size_t i) noexcept {
        return {data_.data() + (o * in_ + i) * k_ * k_, k_ * k_};
    }

    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }
    const std::vector<float>& values() const noexcept { return data_; }

    friend bool operator==(const FilterBank&, const FilterBank&) = default;

private:
    void check_dims() const {
        if (out_ == 0 || in_ == 0 || k_ == 0) throw ConfigError("FilterBank: dimensions must be >= 1");
        if (k_ % 2 == 0) throw ConfigError("FilterBank: kernel size must be odd");
    }

    std::size_t out_ = 0, in_ = 0, k_ = 0;
    std::vector<float> data_;
};

/// Zero padding added around the spatial dimensions.
struct PaddingSpec {
    std::size_t top = 0;
    std::size_t bottom = 0;
    std::size_t left = 0;
    std::size_t right = 0;

    static constexpr PaddingSpec uniform(std::size_t p) noexcept { return {p, p, p, p}; }
    /// Symmetric padding that keeps a stride-1 KxK convolution same-size.
    static constexpr PaddingSpec same(std::size_t kernel) noexcept { return uniform((kernel - 1) / 2); }

    friend bool operator==(const PaddingSpec&, const PaddingSpec&) = default;
};

inline FeatureMap pad(const FeatureMap& map, const PaddingSpec& spec) {
    FeatureMap out(map.channels(), map.height() + spec.top + spec.bottom,
                   map.width() + spec.left + spec.right, 0.0f);
    for (std::size_t c = 0; c < map.channels(); ++c)
        for (std::size_t y = 0; y < map.height(); ++y)
            for (std::size_t x = 0; x < map.width(); ++x)
                out(c, y + spec.top, x + spec.left) = map(c, y, x);
    return out;
}

/// Stride-1 direct convolution (cross-correlation, as in CNN frameworks).
/// The output spatial size is (H + top + bottom - K + 1) x (W + left + right - K + 1);
/// with PaddingSpec::same(K) that is H x W. Every multiply-accumulate is
/// counted, including those that hit zero padding.
template <class Counter = NullCounter>
FeatureMap conv2d_direct(const FeatureMap& map, const FilterBank& filters, const PaddingSpec& padding,
                         Counter&& counter = Counter{}) {
    if (map.channels() != filters.in_channels())
        throw ConfigError("conv2d_direct: input has " + std::to_string(map.channels()) +
                          " channels, filters expect " + std::to_string(filters.in_channels()));
    const std::size_t k = filters.kernel();
    const FeatureMap padded = pad(map, padding);
    if (padded.height() < k || padded.width() < k)
        throw ConfigError("conv2d_direct: padded input smaller than kernel");
    const std::size_t out_h = padded.height() - k + 1;
    const std::size_t out_w = padded.width() - k + 1;
    const std::size_t cin = filters.in_channels();

    FeatureMap out(filters.out_channels(), out_h, out_w);
    for (std::size_t o = 0; o < filters.out_channels(); ++o) {
        for (std::size_t y = 0; y < out_h; ++y) {
            for (std::size_t x = 0; x < out_w; ++x) {
                double acc = 0.0;
                for (std::size_t i = 0; i < cin; ++i) {
                    const auto w = filters.slice(o, i);
                    for (std::size_t u = 0; u < k; ++u)
                        for (std::size_t v = 0; v < k; ++v)
                            acc += static_cast<double>(w[u * k + v]) * padded(i, y + u, x + v);
                }
                counter.mul(cin * k * k);
                counter.add(cin * k * k);
                out(o, y, x) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

/// FLOPs of a same-size stride-1 convolution: 2 * H * W * K^2 * C_in * C_out.
constexpr std::uint64_t mac_count_regular(std::uint64_t c_in, std::uint64_t c_out, std::uint64_t h,
                                          std::uint64_t w, std::uint64_t k) noexcept {
    return 2 * h * w * k * k * c_in * c_out;
}

} // namespace haste

#endif // HASTE_TENSOR_HPP
