#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lrsaa {

/// Seeded random source with a fixed, platform-independent output sequence.
///
/// The engine is std::mt19937_64, whose output is pinned by the C++ standard.
/// The standard distributions are implementation-defined, so every draw the
/// toolkit needs is derived here from raw 64-bit engine words:
///
///   uniform()     (word >> 11) * 2^-53, in [0, 1)
///   below(n)      rejection sampling on the top of the 64-bit range
///   normal()      Box-Muller, using the cosine branch only
///   poisson(l)    Knuth multiplication (l <= 30) or normal approximation
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    double normal(double mean = 0.0, double sigma = 1.0);

    std::uint64_t poisson(double lambda);

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finaliser; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

/// Per-image seed from a user seed and an image identifier (FNV-1a of the id,
/// mixed with the seed). An empty id returns the user seed unchanged.
std::uint64_t derive_image_seed(std::uint64_t user_seed, std::string_view image_id) noexcept;

}  // namespace lrsaa
