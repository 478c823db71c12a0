#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tpca {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// FNV-1a, stable across platforms (std::hash is not).
constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

/// Derives independent, reproducible RNG streams from (seed, tag, index).
///
/// Every Monte-Carlo consumer asks for its own stream, so results do not
/// depend on the order in which trials are executed.
class SeedSequence {
public:
    explicit SeedSequence(std::uint64_t seed = 0) : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t derive(std::string_view tag, std::uint64_t index = 0) const {
        std::uint64_t h = detail::splitmix64(seed_);
        h = detail::splitmix64(h ^ detail::fnv1a(tag));
        h = detail::splitmix64(h ^ index);
        return h;
    }

    Rng stream(std::string_view tag, std::uint64_t index = 0) const { return Rng(derive(tag, index)); }

    /// A child sequence, e.g. one per trial.
    SeedSequence child(std::string_view tag, std::uint64_t index = 0) const {
        return SeedSequence(derive(tag, index));
    }

private:
    std::uint64_t seed_;
};

inline double standard_normal(Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

} // namespace tpca
