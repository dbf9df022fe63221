#include "lrsaa/rng.hpp"

#include <cmath>
#include <numbers>

namespace lrsaa {

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Reject the final partial bucket so every residue is equally likely.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    for (;;) {
        const std::uint64_t x = engine_();
        if (x < limit) return x % n;
    }
}

double Rng::normal(double mean, double sigma) {
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log1p(-u1));
    return mean + sigma * radius * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::poisson(double lambda) {
    if (!(lambda > 0.0)) return 0;
    if (lambda > 30.0) {
        const double x = std::round(normal(lambda, std::sqrt(lambda)));
        return x < 0.0 ? 0 : static_cast<std::uint64_t>(x);
    }
    const double limit = std::exp(-lambda);
    std::uint64_t k = 0;
    double p = uniform();
    while (p > limit) {
        ++k;
        p *= uniform();
    }
    return k;
}

std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
    return mix_seed(mix_seed(a) ^ (b + 0x632be59bd9b4e019ULL));
}

std::uint64_t derive_image_seed(std::uint64_t user_seed, std::string_view image_id) noexcept {
    if (image_id.empty()) return user_seed;
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : image_id) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix_seed(user_seed, h);
}

}  // namespace lrsaa
