#ifndef HASTE_LSH_HPP
#define HASTE_LSH_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "haste/counter.hpp"
#include "haste/error.hpp"
#include "haste/rng.hpp"

namespace haste {

/// Sparse random-projection hashing parameters.
///   hyperplanes : L, number of sign bits per code (1..62)
///   sparsity    : s, expected fraction of zero entries per plane, in (0, 1)
///   dim         : d, length of hashed vectors
struct HashConfig {
    unsigned hyperplanes = 16;
    double sparsity = 0.5;
    std::size_t dim = 25;
    std::uint64_t seed = 0;

    static constexpr unsigned max_hyperplanes = 62;

    void validate() const {
        if (!(sparsity > 0.0 && sparsity < 1.0))
            throw ConfigError("HashConfig: sparsity must lie in (0, 1), got " + std::to_string(sparsity));
        if (hyperplanes < 1 || hyperplanes > max_hyperplanes)
            throw ConfigError("HashConfig: hyperplane count must be in [1, 62], got " +
                              std::to_string(hyperplanes));
        if (dim < 1) throw ConfigError("HashConfig: dimension must be >= 1");
    }
};

struct BucketCode {
    std::uint64_t value = 0;
    friend constexpr auto operator<=>(const BucketCode&, const BucketCode&) = default;
};

/// Returns 1 iff plane . x > 0. The dot product is a signed sum over the
/// plane's non-zero entries; one addition is counted per non-zero entry.
template <class Counter = NullCounter>
unsigned hash_bit(std::span<const std::int8_t> plane, std::span<const float> x, Counter&& counter = Counter{}) {
    if (plane.size() != x.size())
        throw ConfigError("hash_bit: plane dimension " + std::to_string(plane.size()) +
                          " != vector dimension " + std::to_string(x.size()));
    double dot = 0.0;
    std::uint64_t nnz = 0;
    for (std::size_t j = 0; j < plane.size(); ++j) {
        if (plane[j] > 0) {
            dot += x[j];
            ++nnz;
        } else if (plane[j] < 0) {
            dot -= x[j];
            ++nnz;
        }
    }
    counter.add(nnz);
    return dot > 0.0 ? 1u : 0u;
}

/// L ternary hyperplane normals, stored plane-major.
class HyperplaneSet {
public:
    HyperplaneSet() = default;

    /// Draws entry j of plane l from uniform draw l*d + j of CounterRng(seed):
    /// u < s gives 0, u < s + (1-s)/2 gives +1, otherwise -1. Planes for a
    /// smaller L are therefore a prefix of the planes for a larger L.
    explicit HyperplaneSet(const HashConfig& config) : config_(config) {
        config_.validate();
        const CounterRng rng(config_.seed);
        const std::size_t d = config_.dim;
        const double s = config_.sparsity;
        const double plus_cut = s + (1.0 - s) / 2.0;
        entries_.resize(static_cast<std::size_t>(config_.hyperplanes) * d);
        nnz_.assign(config_.hyperplanes, 0);
        for (std::size_t l = 0; l < config_.hyperplanes; ++l) {
            for (std::size_t j = 0; j < d; ++j) {
                const double u = rng.uniform(l * d + j);
                std::int8_t e = u < s ? 0 : (u < plus_cut ? 1 : -1);
                entries_[l * d + j] = e;
                if (e != 0) ++nnz_[l];
            }
        }
    }

    /// Planes given explicitly (entries must be in {-1, 0, +1}).
    HyperplaneSet(const HashConfig& config, std::vector<std::int8_t> entries)
        : config_(config), entries_(std::move(entries)) {
        if (config_.hyperplanes < 1 || config_.hyperplanes > HashConfig::max_hyperplanes || config_.dim < 1)
            throw ConfigError("HyperplaneSet: bad L or d");
        if (entries_.size() != static_cast<std::size_t>(config_.hyperplanes) * config_.dim)
            throw ConfigError("HyperplaneSet: entry count does not equal L*d");
        nnz_.assign(config_.hyperplanes, 0);
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i] < -1 || entries_[i] > 1) throw ConfigError("HyperplaneSet: entries must be ternary");
            if (entries_[i] != 0) ++nnz_[i / config_.dim];
        }
    }

    const HashConfig& config() const noexcept { return config_; }
    unsigned count() const noexcept { return config_.hyperplanes; }
    std::size_t dim() const noexcept { return config_.dim; }

    std::span<const std::int8_t> plane(std::size_t l) const noexcept {
        return {entries_.data() + l * config_.dim, config_.dim};
    }
    std::span<const std::int8_t> entries() const noexcept { return entries_; }

    /// Non-zero entries in plane l.
    std::size_t nonzeros(std::size_t l) const noexcept { return nnz_[l]; }
    std::size_t total_nonzeros() const noexcept {
        std::size_t t = 0;
        for (auto n : nnz_) t += n;
        return t;
    }

private:
    HashConfig config_{};
    std::vector<std::int8_t> entries_;
    std::vector<std::size_t> nnz_;
};

inline HyperplaneSet generate_hyperplanes(const HashConfig& config) { return HyperplaneSet(config); }

/// Bucket code sum_l 2^(l-1) h_l(x): plane 1 is the least significant bit.
template <class Counter = NullCounter>
BucketCode hash_vector(const HyperplaneSet& planes, std::span<const float> x, Counter&& counter = Counter{}) {
    if (x.size() != planes.dim())
        throw ConfigError("hash_vector: vector dimension " + std::to_string(x.size()) +
                          " != hyperplane dimension " + std::to_string(planes.dim()));
    std::uint64_t code = 0;
    for (std::size_t l = 0; l < planes.count(); ++l)
        code |= static_cast<std::uint64_t>(hash_bit(planes.plane(l), x, counter)) << l;
    return {code};
}

} // namespace haste

#endif // HASTE_LSH_HPP
