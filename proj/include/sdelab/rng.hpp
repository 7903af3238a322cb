#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace sdelab {

/// SplitMix64 finalizer; also the state expander for Xoshiro.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
    std::uint64_t s = a ^ (b * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL);
    return splitmix64(s);
}

/// xoshiro256++ (Blackman and Vigna); satisfies UniformRandomBitGenerator.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept {
        for (auto& word : s_) word = splitmix64(seed);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t out = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return out;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_{};
};

/// What a stream is used for; part of the stream key.
enum class Purpose : std::uint32_t {
    Driver = 1,       // fine Brownian path
    Bridge = 2,       // resampled bridge fillings
    Refinement = 3,   // lazy lattice refinement
    Inner = 4,        // nested conditional-expectation fillings
    Bootstrap = 5,
    Method = 6,       // randomized adaptive methods
    Auxiliary = 7,
};

/**
 * Single-owner stream of standard normals and uniforms, keyed by
 * (master seed, replication, interval, purpose). Distinct keys give
 * statistically independent streams; equal keys replay the same numbers.
 */
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t replication, std::uint64_t interval,
              Purpose purpose) noexcept
        : engine_(mix64(mix64(mix64(seed, replication), interval), static_cast<std::uint64_t>(purpose))) {}

    double normal() { return normal_(engine_); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::uint64_t bits() noexcept { return engine_(); }
    Xoshiro256& engine() noexcept { return engine_; }

private:
    Xoshiro256 engine_;
    boost::random::normal_distribution<double> normal_;
};

/// Derives the streams of one replication.
struct StreamFamily {
    std::uint64_t seed = 0;
    std::uint64_t replication = 0;

    RngStream stream(Purpose purpose, std::uint64_t interval = 0) const noexcept {
        return RngStream(seed, replication, interval, purpose);
    }
};

}  // namespace sdelab
