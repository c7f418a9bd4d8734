#ifndef HASTE_BUCKETS_HPP
#define HASTE_BUCKETS_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "haste/lsh.hpp"
#include "haste/patch.hpp"
#include "haste/rng.hpp"

namespace haste {

/// Grouping of one patch's input channels. Groups are ordered by ascending
/// bucket code and hold ascending channel indices (0-based).
class BucketAssignment {
public:
    BucketAssignment() = default;

    /// Groups channels sharing a code.
    static BucketAssignment from_codes(std::vector<BucketCode> codes) {
        if (codes.empty()) throw ConfigError("BucketAssignment: no channels");
        std::map<std::uint64_t, std::vector<std::uint32_t>> by_code;
        for (std::size_t i = 0; i < codes.size(); ++i) by_code[codes[i].value].push_back(static_cast<std::uint32_t>(i));
        BucketAssignment a;
        a.codes_ = std::move(codes);
        a.groups_.reserve(by_code.size());
        for (auto& [code, members] : by_code) a.groups_.push_back(std::move(members));
        return a;
    }

    /// Explicit partition; `codes` gives each channel's bucket label.
    BucketAssignment(std::vector<BucketCode> codes, std::vector<std::vector<std::uint32_t>> groups)
        : codes_(std::move(codes)), groups_(std::move(groups)) {
        validate();
    }

    const std::vector<BucketCode>& codes() const noexcept { return codes_; }
    const std::vector<std::vector<std::uint32_t>>& groups() const noexcept { return groups_; }

    std::size_t channels() const noexcept { return codes_.size(); }
    std::size_t reduced_channels() const noexcept { return groups_.size(); }
    std::size_t merged_buckets() const noexcept {
        return static_cast<std::size_t>(
            std::count_if(groups_.begin(), groups_.end(), [](const auto& g) { return g.size() >= 2; }));
    }
    /// r = 1 - C~_in / C_in.
    double ratio() const noexcept {
        return 1.0 - static_cast<double>(reduced_channels()) / static_cast<double>(channels());
    }

    std::vector<std::size_t> group_sizes() const {
        std::vector<std::size_t> s;
        s.reserve(groups_.size());
        for (const auto& g : groups_) s.push_back(g.size());
        return s;
    }

    /// Groups are non-empty, disjoint and cover every channel exactly once.
    void validate() const {
        std::vector<char> seen(codes_.size(), 0);
        std::size_t total = 0;
        for (const auto& g : groups_) {
            if (g.empty()) throw ConfigError("BucketAssignment: empty group");
            for (auto i : g) {
                if (i >= codes_.size() || seen[i]) throw ConfigError("BucketAssignment: groups do not partition channels");
                seen[i] = 1;
                ++total;
            }
        }
        if (total != codes_.size()) throw ConfigError("BucketAssignment: groups do not cover all channels");
    }

private:
    std::vector<BucketCode> codes_;
    std::vector<std::vector<std::uint32_t>> groups_;
};

template <class Counter = NullCounter>
BucketAssignment assign_buckets(const ChannelVectors& vectors, const HyperplaneSet& planes, Counter&& counter = Counter{}) {
    if (vectors.dim != planes.dim())
        throw ConfigError("assign_buckets: vector dimension " + std::to_string(vectors.dim) +
                          " != hyperplane dimension " + std::to_string(planes.dim()));
    std::vector<BucketCode> codes(vectors.count);
    for (std::size_t i = 0; i < vectors.count; ++i) codes[i] = hash_vector(planes, vectors.row(i), counter);
    return BucketAssignment::from_codes(std::move(codes));
}

/// Random grouping with prescribed group sizes: a uniform permutation of the
/// channels (Fisher-Yates driven by CounterRng(seed)) is cut into consecutive
/// runs of the given sizes. Group k is labelled with code k.
inline BucketAssignment assign_random(std::span<const std::size_t> sizes, std::size_t channels, std::uint64_t seed) {
    const std::size_t sum = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    if (sum != channels)
        throw ConfigError("assign_random: group sizes sum to " + std::to_string(sum) + ", expected " +
                          std::to_string(channels));
    if (std::find(sizes.begin(), sizes.end(), std::size_t{0}) != sizes.end())
        throw ConfigError("assign_random: zero-sized group");

    std::vector<std::uint32_t> perm(channels);
    std::iota(perm.begin(), perm.end(), 0u);
    const CounterRng rng(seed);
    std::uint64_t draw = 0;
    for (std::size_t i = channels; i > 1; --i) {
        const std::size_t j = rng.below(i, draw);
        std::swap(perm[i - 1], perm[j]);
    }

    std::vector<BucketCode> codes(channels);
    std::vector<std::vector<std::uint32_t>> groups;
    groups.reserve(sizes.size());
    std::size_t pos = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        std::vector<std::uint32_t> g(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                                     perm.begin() + static_cast<std::ptrdiff_t>(pos + sizes[k]));
        std::sort(g.begin(), g.end());
        for (auto i : g) codes[i] = BucketCode{k};
        groups.push_back(std::move(g));
        pos += sizes[k];
    }
    return BucketAssignment(std::move(codes), std::move(groups));
}

inline BucketAssignment assign_random(const BucketAssignment& reference, std::uint64_t seed) {
    const auto sizes = reference.group_sizes();
    return assign_random(sizes, reference.channels(), seed);
}

} // namespace haste

#endif // HASTE_BUCKETS_HPP
