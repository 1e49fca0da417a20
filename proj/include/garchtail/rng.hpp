#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace garchtail {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31U);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/**
 * @brief Hierarchical seed: master seed -> domain -> indices.
 *
 * Every stochastic routine takes a StreamKey instead of a live generator and
 * derives one generator per fixed-size work block, so results do not depend on
 * how blocks are spread across workers.
 */
class StreamKey {
public:
    constexpr explicit StreamKey(std::uint64_t seed) noexcept : state_(detail::splitmix64(seed)) {}

    [[nodiscard]] constexpr StreamKey domain(std::string_view name) const noexcept {
        return StreamKey(state_, detail::fnv1a(name));
    }

    [[nodiscard]] constexpr StreamKey sub(std::uint64_t index) const noexcept {
        return StreamKey(state_, index);
    }

    [[nodiscard]] constexpr std::uint64_t value() const noexcept { return state_; }

    [[nodiscard]] Rng rng() const {
        std::seed_seq seq{static_cast<std::uint32_t>(state_), static_cast<std::uint32_t>(state_ >> 32U),
                          0x6a09e667U, 0xbb67ae85U};
        return Rng(seq);
    }

private:
    constexpr StreamKey(std::uint64_t parent, std::uint64_t salt) noexcept
        : state_(detail::splitmix64(parent ^ detail::splitmix64(salt + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t state_;
};

}  // namespace garchtail
