#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>

namespace attrcrit {

/// Seeded generator with hand-rolled uniform/normal draws.
/// std::normal_distribution is implementation-defined; these are not, so a
/// given seed produces the same stream on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0,1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller; caches the spare draw.
    double normal() {
        if (hasSpare_) {
            hasSpare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        hasSpare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::uint64_t next() { return gen_(); }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool hasSpare_ = false;
};

/// splitmix64 finalizer; good enough to decorrelate derived seeds.
inline std::uint64_t mixSeed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic per-(run, image, method) seed, independent of evaluation order.
inline std::uint64_t deriveSeed(std::uint64_t base, std::string_view a, std::string_view b = {}) {
    std::uint64_t h = mixSeed(base);
    for (char c : a) h = mixSeed(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    h = mixSeed(h ^ 0x5bd1e995ULL);
    for (char c : b) h = mixSeed(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    return h;
}

} // namespace attrcrit
