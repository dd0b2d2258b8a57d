#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace floq {

/// Deterministic 64-bit generator (SplitMix64 core). The internal state
/// advances by a fixed increment per draw, so the sequence depends only on
/// the seed and the number of draws consumed; `draws()` exposes the stream
/// position so sampling routines can document their exact stream advance.
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), state_(seed), draws_(0) {}

    /// One draw.
    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        ++draws_;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits. One draw.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Box-Muller pair of independent standard normals. Exactly two draws.
    std::pair<double, double> next_normal_pair() {
        const double u1 = 1.0 - next_uniform();  // (0, 1], keeps the log finite
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(phi), r * std::sin(phi)};
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t draws() const { return draws_; }

  private:
    std::uint64_t seed_;
    std::uint64_t state_;
    std::uint64_t draws_;
};

}  // namespace floq
