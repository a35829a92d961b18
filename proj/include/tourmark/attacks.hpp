#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tourmark/core.hpp"
#include "tourmark/rng.hpp"

namespace tourmark {

enum class AttackKind { kNone, kDelete, kSubstitute, kCopyPaste };

struct AttackSpec {
    AttackKind kind = AttackKind::kNone;
    double ratio = 0.0;   // rho
    int segments = 3;     // copy-paste only
    std::uint64_t attack_seed = 0;
};

namespace detail {

// Generated region of a sequence; attacks never touch the prompt and the
// attacked output carries prompt_len = 0 (the detector is not told where the
// prompt ended).
inline std::vector<TokenId> generated_region(const TokenSequence& text) {
    text.validate();
    return {text.tokens.begin() + static_cast<long long>(text.prompt_len), text.tokens.end()};
}

// floor(ratio * n) distinct positions, uniformly chosen (partial
// Fisher-Yates), returned sorted.
inline std::vector<std::size_t> pick_positions(std::size_t n, double ratio, SplitMix64& rng) {
    const auto count = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace detail

// Removes floor(rho * T) uniformly chosen tokens, preserving the survivors'
// order.
inline TokenSequence attack_delete(const TokenSequence& text, double ratio,
                                   std::uint64_t attack_seed) {
    if (ratio < 0.0 || ratio > 1.0) throw std::invalid_argument("attack_delete: ratio in [0, 1]");
    std::vector<TokenId> body = detail::generated_region(text);
    if (ratio == 0.0) return TokenSequence{std::move(body), 0};
    SplitMix64 rng(mix64(attack_seed ^ 0xD0D0D0D0ULL));
    const auto drop = detail::pick_positions(body.size(), ratio, rng);
    std::vector<TokenId> out;
    out.reserve(body.size() - drop.size());
    std::size_t d = 0;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (d < drop.size() && drop[d] == i) {
            ++d;
            continue;
        }
        out.push_back(body[i]);
    }
    return TokenSequence{std::move(out), 0};
}

// Replaces floor(rho * T) uniformly chosen tokens with uniform random
// *different* tokens; length preserved. Random-token replacement stands in
// for synonym substitution at desk scale (strictly harsher on the seed
// windows than a lexical substitute would be).
inline TokenSequence attack_substitute(const TokenSequence& text, double ratio,
                                       std::uint32_t vocab, std::uint64_t attack_seed) {
    if (ratio < 0.0 || ratio > 1.0) throw std::invalid_argument("attack_substitute: ratio in [0, 1]");
    if (vocab < 2) throw std::invalid_argument("attack_substitute: vocab must be >= 2");
    std::vector<TokenId> body = detail::generated_region(text);
    if (ratio == 0.0) return TokenSequence{std::move(body), 0};
    SplitMix64 rng(mix64(attack_seed ^ 0x5B5B5B5BULL));
    const auto hits = detail::pick_positions(body.size(), ratio, rng);
    for (const std::size_t i : hits) {
        TokenId replacement;
        do {
            replacement = static_cast<TokenId>(rng.below(vocab));
        } while (replacement == body[i]);
        body[i] = replacement;
    }
    return TokenSequence{std::move(body), 0};
}

// Copy-paste attack CP-n-rho: the watermarked text is cut at n-1 uniformly
// chosen distinct boundaries into n contiguous segments, and unwatermarked
// filler totalling rho of the OUTPUT is interleaved as n+1 blocks
// (filler, seg1, filler, ..., segn, filler), block sizes as equal as
// possible with the remainder going to the leading blocks. Filler tokens are
// taken from the front of `filler`'s generated region.
inline TokenSequence attack_copy_paste(const TokenSequence& text, int segments, double ratio,
                                       const TokenSequence& filler, std::uint64_t attack_seed) {
    if (segments < 1) throw std::invalid_argument("attack_copy_paste: need at least one segment");
    if (ratio < 0.0 || ratio >= 1.0) throw std::invalid_argument("attack_copy_paste: ratio in [0, 1)");
    std::vector<TokenId> body = detail::generated_region(text);
    if (ratio == 0.0) return TokenSequence{std::move(body), 0};
    const std::size_t t_len = body.size();
    if (static_cast<std::size_t>(segments) > t_len)
        throw std::invalid_argument("attack_copy_paste: more segments than tokens");

    const auto filler_total = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(t_len) / (1.0 - ratio)));
    const std::vector<TokenId> filler_body = detail::generated_region(filler);
    if (filler_body.size() < filler_total)
        throw std::invalid_argument("attack_copy_paste: insufficient filler tokens");

    // n-1 distinct interior cut points
    SplitMix64 rng(mix64(attack_seed ^ 0xC0FFEEULL));
    std::vector<std::size_t> cuts;
    while (cuts.size() + 1 < static_cast<std::size_t>(segments)) {
        const std::size_t c = 1 + static_cast<std::size_t>(rng.below(t_len - 1));
        if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.insert(cuts.begin(), 0);
    cuts.push_back(t_len);

    const int blocks = segments + 1;
    const std::size_t base_block = filler_total / blocks;
    const std::size_t remainder = filler_total % blocks;

    std::vector<TokenId> out;
    out.reserve(t_len + filler_total);
    std::size_t filler_pos = 0;
    auto emit_filler = [&](int block_index) {
        const std::size_t len = base_block + (static_cast<std::size_t>(block_index) < remainder ? 1 : 0);
        for (std::size_t i = 0; i < len; ++i) out.push_back(filler_body[filler_pos++]);
    };
    for (int s = 0; s < segments; ++s) {
        emit_filler(s);
        out.insert(out.end(), body.begin() + static_cast<long long>(cuts[s]),
                   body.begin() + static_cast<long long>(cuts[s + 1]));
    }
    emit_filler(segments);

    if (out.size() != t_len + filler_total)
        throw std::logic_error("attack_copy_paste: layout accounting mismatch");
    return TokenSequence{std::move(out), 0};
}

inline TokenSequence apply_attack(const TokenSequence& text, const AttackSpec& spec,
                                  std::uint32_t vocab, const TokenSequence& filler) {
    switch (spec.kind) {
        case AttackKind::kNone: return TokenSequence{detail::generated_region(text), 0};
        case AttackKind::kDelete: return attack_delete(text, spec.ratio, spec.attack_seed);
        case AttackKind::kSubstitute:
            return attack_substitute(text, spec.ratio, vocab, spec.attack_seed);
        case AttackKind::kCopyPaste:
            return attack_copy_paste(text, spec.segments, spec.ratio, filler, spec.attack_seed);
    }
    throw std::logic_error("apply_attack: unknown attack kind");
}

}  // namespace tourmark
