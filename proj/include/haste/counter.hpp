#ifndef HASTE_COUNTER_HPP
#define HASTE_COUNTER_HPP

#include <cstdint>

namespace haste {

/// Tallies floating-point additions and multiplications (divisions count as
/// multiplications). Kernels take the counter as a template parameter so the
/// uninstrumented path compiles to nothing.
struct OpCounter {
    std::uint64_t adds = 0;
    std::uint64_t muls = 0;

    void add(std::uint64_t n = 1) noexcept { adds += n; }
    void mul(std::uint64_t n = 1) noexcept { muls += n; }
    std::uint64_t flops() const noexcept { return adds + muls; }
};

struct NullCounter {
    constexpr void add(std::uint64_t = 1) const noexcept {}
    constexpr void mul(std::uint64_t = 1) const noexcept {}
};

} // namespace haste

#endif // HASTE_COUNTER_HPP
