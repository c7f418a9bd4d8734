#ifndef HASTE_RNG_HPP
#define HASTE_RNG_HPP

#include <cstdint>

namespace haste {

/// Counter-based generator: draw n of stream `seed` is
///
///   splitmix64_finalize(seed + 0x9E3779B97F4A7C15 * (n + 1))
///
/// so any draw can be produced independently of the others. uniform(n) keeps
/// the top 53 bits, giving a double in [0, 1).
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    constexpr std::uint64_t bits(std::uint64_t n) const noexcept {
        return mix(seed_ + 0x9E3779B97F4A7C15ULL * (n + 1));
    }

    constexpr double uniform(std::uint64_t n) const noexcept {
        return static_cast<double>(bits(n) >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound) by rejection on the top bits; consumes
    /// draws starting at `n` and advances it.
    constexpr std::uint64_t below(std::uint64_t bound, std::uint64_t& n) const noexcept {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        for (;;) {
            const std::uint64_t b = bits(n++);
            if (b < limit) return b % bound;
        }
    }

    constexpr std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
};

/// Child seed for sub-stream `tag` of `seed` (per layer, per image, ...).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
    return CounterRng(seed ^ 0xD1B54A32D192ED03ULL).bits(tag);
}

} // namespace haste

#endif // HASTE_RNG_HPP
