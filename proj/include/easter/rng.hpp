#pragma once

#include <cstdint>
#include <random>

namespace easter {

/// Seeded pseudo-random source.
///
/// Distributions are derived directly from the raw 64-bit engine output so
/// streams are identical across standard-library implementations (the
/// std:: distribution classes are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Independent stream keyed by (seed, a, b, c).
    static Rng derive(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in the open interval (0, 1); never returns exactly 0 or 1.
    double uniform01();
    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    /// Standard normal via Box-Muller.
    double normal();

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace easter
