#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "tourmark/core.hpp"
#include "tourmark/keying.hpp"
#include "tourmark/rng.hpp"

namespace tourmark {

// Domain separator for g-value streams (wire format).
inline constexpr std::uint64_t kGValueDomain = 0x67F0A4E1D3B5C897ULL;

// Variant 0 is the base family; variant 1 is the independently salted family
// used when FamilyScheme::kIndependent replaces the complementary pair.
inline constexpr int kBaseFamily = 0;
inline constexpr int kIndependentFamily = 1;

// Stream salt for one (token, layer, group, variant) tuple. The packing is
// part of the compatibility contract: layer occupies bits 32..43, group bits
// 44..55, variant bits 56..63. Layer and group are 0-based here.
[[nodiscard]] constexpr std::uint64_t g_stream_salt(TokenId token, int layer, int group,
                                                    int variant) noexcept {
    const std::uint64_t packed = static_cast<std::uint64_t>(token) |
                                 (static_cast<std::uint64_t>(layer) << 32) |
                                 (static_cast<std::uint64_t>(group) << 44) |
                                 (static_cast<std::uint64_t>(variant) << 56);
    return mix64(packed ^ kGValueDomain);
}

// Pseudo-random binary score of a token at one tournament layer. Marginally
// Bernoulli(0.5) over uniform seeds and independent across layers, groups and
// variants (distinct stream salts). O(1), no tables required.
[[nodiscard]] inline int g_value(TokenId token, SeedValue seed, int layer, int group) {
    return static_cast<int>(mix64(seed.value ^ g_stream_salt(token, layer, group, kBaseFamily)) & 1u);
}

// Complementary score, exactly 1 - g.
[[nodiscard]] inline int g_complement(TokenId token, SeedValue seed, int layer, int group) {
    return 1 - g_value(token, seed, layer, group);
}

// Independently salted second family (ablation stand-in for the complement).
[[nodiscard]] inline int g_value_variant(TokenId token, SeedValue seed, int layer, int group,
                                         int variant) {
    if (variant < 0 || variant > 255) throw std::invalid_argument("g_value_variant: variant out of range");
    return static_cast<int>(mix64(seed.value ^ g_stream_salt(token, layer, group, variant)) & 1u);
}

// Vocabulary-wide g-value evaluation with the per-token stream salts cached,
// so the embedding hot loop pays one table load plus one mix64 per score.
// Holds the k groups of m-layer families plus (optionally) their independent
// counterparts.
class GValueFamilySet {
public:
    GValueFamilySet(int groups_k, int layers_m, std::uint32_t vocab_size,
                    bool with_independent_family = false)
        : groups_k_(groups_k),
          layers_m_(layers_m),
          vocab_(vocab_size),
          variants_(with_independent_family ? 2 : 1) {
        if (groups_k < 1 || groups_k > 4095) throw std::invalid_argument("g families: groups out of range");
        if (layers_m < 1 || layers_m > 4095) throw std::invalid_argument("g families: layers out of range");
        if (vocab_size == 0) throw std::invalid_argument("g families: empty vocabulary");
        salts_.resize(static_cast<std::size_t>(variants_) * layers_m_ * groups_k_ * vocab_);
        for (int variant = 0; variant < variants_; ++variant)
            for (int layer = 0; layer < layers_m_; ++layer)
                for (int group = 0; group < groups_k_; ++group) {
                    std::uint64_t* row = salt_row(variant, layer, group);
                    for (std::uint32_t tok = 0; tok < vocab_; ++tok)
                        row[tok] = g_stream_salt(tok, layer, group, variant);
                }
    }

    [[nodiscard]] int groups() const noexcept { return groups_k_; }
    [[nodiscard]] int layers() const noexcept { return layers_m_; }
    [[nodiscard]] std::uint32_t vocab_size() const noexcept { return vocab_; }

    // Fills out[token] with the g bit of every token at (seed, layer, group).
    void fill_bits(SeedValue seed, int layer, int group, int variant,
                   std::span<std::uint8_t> out) const {
        if (variant >= variants_) throw std::invalid_argument("g families: variant not materialized");
        if (out.size() != vocab_) throw std::invalid_argument("g families: output size != vocab");
        const std::uint64_t* row = salt_row(variant, layer, group);
        for (std::uint32_t tok = 0; tok < vocab_; ++tok)
            out[tok] = static_cast<std::uint8_t>(mix64(seed.value ^ row[tok]) & 1u);
    }

private:
    [[nodiscard]] const std::uint64_t* salt_row(int variant, int layer, int group) const {
        const std::size_t idx =
            ((static_cast<std::size_t>(variant) * layers_m_ + layer) * groups_k_ + group) * vocab_;
        return salts_.data() + idx;
    }
    [[nodiscard]] std::uint64_t* salt_row(int variant, int layer, int group) {
        return const_cast<std::uint64_t*>(std::as_const(*this).salt_row(variant, layer, group));
    }

    int groups_k_;
    int layers_m_;
    std::uint32_t vocab_;
    int variants_;
    std::vector<std::uint64_t> salts_;
};

}  // namespace tourmark
