#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "tourmark/core.hpp"
#include "tourmark/rng.hpp"

namespace tourmark {

// Wire-format constants. Together with mix64 they fix the seed derivation
// and position assignment exactly; changing any of them invalidates all
// previously embedded text.
inline constexpr std::uint64_t kSeedDomain = 0xA2C2B5E014D5A9E3ULL;
inline constexpr std::uint64_t kPositionDomain = 0x1B56C4E9D6A7F803ULL;
inline constexpr std::uint64_t kStepDomain = 0x7D0C41B3E29F55A1ULL;

// Padding token for window positions that fall before the start of the
// sequence; never a real vocabulary id.
inline constexpr TokenId kPaddingSentinel = 0xFFFFFFFFu;

// Per-step seed r_t. Deterministic in (window, key); 64-bit.
struct SeedValue {
    std::uint64_t value = 0;

    [[nodiscard]] bool operator==(const SeedValue&) const = default;
};

// Keyed fold of the window tokens: the seed depends only on the tokens to
// the LEFT of the current position, never the candidate token itself, so
// embedder and detector can recompute it from text alone.
inline SeedValue derive_seed(std::span<const TokenId> window, std::uint64_t key) {
    if (window.empty()) throw std::invalid_argument("derive_seed: window must be non-empty");
    std::uint64_t h = mix64(key ^ kSeedDomain);
    for (const TokenId tok : window) h = mix64(h ^ (static_cast<std::uint64_t>(tok) + kGoldenGamma));
    return SeedValue{h};
}

// Window of the window_c tokens preceding position t of `tokens`, with
// positions before the sequence start filled by the sentinel. This is the
// single helper both embedder and decoder use, which is what makes the
// (seed, position) stream self-synchronizing.
inline SeedValue seed_at(std::span<const TokenId> tokens, std::size_t t, int window_c,
                         std::uint64_t key) {
    std::vector<TokenId> window(static_cast<std::size_t>(window_c), kPaddingSentinel);
    for (int i = 0; i < window_c; ++i) {
        const long long idx = static_cast<long long>(t) - window_c + i;
        if (idx >= 0 && idx < static_cast<long long>(tokens.size()))
            window[static_cast<std::size_t>(i)] = tokens[static_cast<std::size_t>(idx)];
    }
    return derive_seed(window, key);
}

// Message position for this step: p = mix(seed, key, salt) mod B. The
// modulo bias at B <= 2^20 is below 2^-44 and irrelevant at desk scale.
inline std::uint32_t assign_position(SeedValue seed, std::uint64_t key, std::uint32_t symbol_count) {
    if (symbol_count < 1) throw std::invalid_argument("assign_position: symbol count must be >= 1");
    const std::uint64_t h = mix64(seed.value ^ mix64(key ^ kPositionDomain));
    return static_cast<std::uint32_t>(h % symbol_count);
}

// Per-sequence record of seeds already used, for repeated-context masking in
// the non-distortionary mode. seen_before() is the mask ("skip watermarking")
// and the caller records the seed afterwards; test_and_record() does both.
class SeedHistory {
public:
    [[nodiscard]] bool seen_before(SeedValue seed) const { return seen_.contains(seed.value); }

    void record(SeedValue seed) { seen_.insert(seed.value); }

    bool test_and_record(SeedValue seed) {
        const bool seen = seen_before(seed);
        seen_.insert(seed.value);
        return seen;
    }

    [[nodiscard]] std::size_t size() const noexcept { return seen_.size(); }

private:
    std::unordered_set<std::uint64_t> seen_;
};

}  // namespace tourmark
