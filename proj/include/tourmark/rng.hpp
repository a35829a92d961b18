#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace tourmark {

// 64-bit avalanche finalizer (SplitMix64 / Stafford mix13). Every keyed
// derivation in the library (context seeds, message positions, g-value
// streams) goes through this function, which makes it part of the on-disk
// compatibility contract: changing the constants invalidates all previously
// embedded text.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// Deterministic counter-based generator. The <random> engines are portable
// but the standard distributions are implementation-defined, so the sampling
// helpers needed by the library live here; all generated artifacts stay
// bit-identical across compilers and platforms.
class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        state_ += kGoldenGamma;
        return mix64(state_);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound); rejection keeps it unbiased.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    // Standard normal via Marsaglia's polar method.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    // Gamma(shape, 1) via Marsaglia-Tsang; the shape < 1 case uses the usual
    // boosting identity gamma(a) = gamma(a + 1) * U^(1/a).
    double gamma(double shape) noexcept {
        if (shape < 1.0) {
            const double u = uniform01();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Symmetric Dirichlet draw; falls back to uniform in the (measure-zero,
// underflow-only) event that every gamma variate rounds to zero.
inline std::vector<double> dirichlet(SplitMix64& rng, std::size_t n, double concentration) {
    std::vector<double> out(n);
    double sum = 0.0;
    for (auto& x : out) {
        x = rng.gamma(concentration);
        sum += x;
    }
    if (sum <= 0.0) {
        for (auto& x : out) x = 1.0 / static_cast<double>(n);
        return out;
    }
    for (auto& x : out) x /= sum;
    return out;
}

}  // namespace tourmark
