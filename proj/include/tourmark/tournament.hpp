#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "tourmark/core.hpp"
#include "tourmark/rng.hpp"

namespace tourmark {

// Explicit N-ary, m-layer elimination with the g-selector already bound to a
// seed/group/message bit. The vectorized closed form below is the production
// path; this literal form exists as the reference oracle.
struct TournamentSpec {
    int layers_m = 1;
    int leaves_n = 2;
    std::function<int(int layer, TokenId token)> g_bit;  // layer is 0-based
};

inline constexpr std::uint64_t kTournamentOracleGuard = 1ull << 20;

// Runs one full tournament: draws N^m i.i.d. candidates from `dist`, then
// eliminates layer by layer, keeping within each N-block a uniformly chosen
// member of the max-g list (so a token appearing several times among the
// maxima advances with proportional probability). Deterministic in rng_seed.
inline TokenId tournament_sample(const ProbabilityDistribution& dist, const TournamentSpec& spec,
                                 std::uint64_t rng_seed) {
    if (spec.layers_m < 1 || spec.leaves_n < 2)
        throw std::invalid_argument("tournament: need m >= 1 and N >= 2");
    std::uint64_t leaves = 1;
    for (int l = 0; l < spec.layers_m; ++l) {
        leaves *= static_cast<std::uint64_t>(spec.leaves_n);
        if (leaves > kTournamentOracleGuard)
            throw std::invalid_argument("tournament: N^m exceeds the oracle guard");
    }

    SplitMix64 rng(rng_seed);
    std::vector<double> cdf(dist.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        acc += dist[i];
        cdf[i] = acc;
    }
    auto draw = [&]() -> TokenId {
        const double u = rng.uniform01() * acc;
        for (std::size_t i = 0; i < cdf.size(); ++i)
            if (u < cdf[i]) return static_cast<TokenId>(i);
        return static_cast<TokenId>(cdf.size() - 1);
    };

    std::vector<TokenId> pool(leaves);
    for (auto& t : pool) t = draw();

    std::vector<TokenId> winners;
    std::vector<TokenId> block;
    for (int layer = 0; layer < spec.layers_m; ++layer) {
        winners.clear();
        for (std::size_t j = 0; j < pool.size(); j += spec.leaves_n) {
            block.clear();
            int best = -1;
            for (int i = 0; i < spec.leaves_n; ++i) {
                const TokenId tok = pool[j + i];
                const int bit = spec.g_bit(layer, tok);
                if (bit > best) {
                    best = bit;
                    block.clear();
                }
                if (bit == best) block.push_back(tok);
            }
            winners.push_back(block[rng.below(block.size())]);
        }
        pool = winners;
    }
    return pool.front();
}

// Closed-form law of a single tournament layer with binary g-values:
//   q(x) = p(x) * p0^(N-1)          when g(x) = 0
//   q(x) = p(x) * (1 - p0^N) / p1   when g(x) = 1
// with p0/p1 the total mass of the g=0 / g=1 tokens. Zero-probability tokens
// stay at zero, and the g=1 branch is vacuous when p1 = 0. The 1 - p0^N
// factor is evaluated as -expm1(N*log1p(-p1)) to stay accurate when p1 is
// tiny.
inline ProbabilityDistribution vectorized_single_layer(const ProbabilityDistribution& dist,
                                                       std::span<const std::uint8_t> g_bits,
                                                       int leaves_n, bool invert_bits = false) {
    if (g_bits.size() != dist.size())
        throw std::invalid_argument("single layer: g bits must match vocabulary size");
    if (leaves_n < 2) throw std::invalid_argument("single layer: N must be >= 2");
    const std::uint8_t flip = invert_bits ? 1 : 0;
    double p1 = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i)
        if ((g_bits[i] ^ flip) != 0) p1 += dist[i];
    const double p0 = 1.0 - p1;
    const double lose_factor = std::pow(p0, leaves_n - 1);
    double win_factor = 0.0;
    if (p1 > 0.0) win_factor = -std::expm1(static_cast<double>(leaves_n) * std::log1p(-p1)) / p1;

    std::vector<double> q(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const double p = dist[i];
        if (p == 0.0) {
            q[i] = 0.0;
            continue;
        }
        q[i] = ((g_bits[i] ^ flip) != 0) ? p * win_factor : p * lose_factor;
    }
    return ProbabilityDistribution(std::move(q));
}

// m-fold composition of the single-layer law; equals the distribution of the
// explicit tournament's winner.
inline ProbabilityDistribution vectorized_multi_layer(
    const ProbabilityDistribution& dist, std::span<const std::vector<std::uint8_t>> g_per_layer,
    int leaves_n, bool invert_bits = false) {
    if (g_per_layer.empty()) throw std::invalid_argument("multi layer: need at least one layer");
    ProbabilityDistribution q = vectorized_single_layer(dist, g_per_layer[0], leaves_n, invert_bits);
    for (std::size_t layer = 1; layer < g_per_layer.size(); ++layer)
        q = vectorized_single_layer(q, g_per_layer[layer], leaves_n, invert_bits);
    return q;
}

}  // namespace tourmark
