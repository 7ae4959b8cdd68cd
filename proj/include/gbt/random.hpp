#pragma once

// Deterministic, splittable random numbers. A stream is a pure function of
// (seed, stream id); replicate k of experiment e uses stream_id(e, k), so
// serial and parallel runs draw identical numbers. All transforms (uniform,
// normal, integer ranges) are implemented here rather than taken from
// <random> distributions, whose output is implementation-defined.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

namespace gbt {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/// Combines hierarchical indices (experiment, grid cell, replicate, ...) into
/// one stream id.
constexpr std::uint64_t stream_id(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
    std::uint64_t s = a * 0xD1B54A32D192ED03ULL;
    std::uint64_t h = detail::splitmix64(s);
    s = h ^ (b * 0xAEF17502108EF2D9ULL);
    h = detail::splitmix64(s);
    s = h ^ (c * 0x9E6C63D0676A9A99ULL);
    return detail::splitmix64(s);
}

/// xoshiro256** seeded through splitmix64 from (seed, stream).
class RandomSource {
public:
    RandomSource(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {
        std::uint64_t sm = seed ^ detail::rotl(stream * 0xC2B2AE3D27D4EB4FULL, 17) ^ 0x5851F42D4C957F2DULL;
        sm = detail::splitmix64(sm) ^ stream;
        for (auto& w : s_) w = detail::splitmix64(sm);
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    /// Independent child stream, e.g. one per replicate.
    RandomSource split(std::uint64_t child) const { return RandomSource(seed_, stream_id(stream_, child, 1)); }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = detail::rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on the open interval (0, 1).
    double uniform_open() noexcept {
        return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
    }

    /// Unbiased integer in [0, bound) (Lemire's multiply-shift rejection).
    std::uint64_t below(std::uint64_t bound) noexcept {
        if (bound <= 1) return 0;
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via the Marsaglia polar method.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    template <class T>
    void shuffle(std::span<T> xs) noexcept {
        for (std::size_t i = xs.size(); i > 1; --i) {
            const std::size_t j = below(i);
            std::swap(xs[i - 1], xs[j]);
        }
    }
    template <class T>
    void shuffle(std::vector<T>& xs) noexcept {
        shuffle(std::span<T>(xs));
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace gbt
