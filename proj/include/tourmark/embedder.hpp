#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tourmark/core.hpp"
#include "tourmark/gvalue.hpp"
#include "tourmark/keying.hpp"
#include "tourmark/tournament.hpp"

namespace tourmark {

// Interface the embedder expects from a language model. The toy model and
// any future real-model adapter both satisfy it.
template <typename Lm>
concept LanguageModelLike = requires(const Lm& lm, std::span<const TokenId> history) {
    { lm.next_distribution(history) } -> std::convertible_to<ProbabilityDistribution>;
    { lm.vocab_size() } -> std::convertible_to<std::uint32_t>;
};

// One generation step of the embedding pipeline, recorded for diagnostics
// and as test ground truth. Masked steps carry no watermark.
struct StepTrace {
    int step = 0;                 // index within the generated region
    SeedValue seed;
    std::uint32_t position = 0;   // message symbol position p
    std::uint32_t symbol = 0;     // embedded symbol (k bits)
    double base_entropy = 0.0;    // H of the (filtered) base distribution
    double lambda = 0.0;          // alpha * activation(H)
    TokenId token = 0;
    bool masked = false;
    double kl_to_base = 0.0;      // KL(final || base), fluency proxy
};

struct EmbedOptions {
    int max_new_tokens = 256;
    int no_repeat_ngram = 4;                 // 0 disables the filter
    std::optional<TokenId> end_token;
    std::optional<double> fixed_lambda;      // overrides entropy modulation (ablations)
};

// Entropy-modulated subtraction strength: lambda = alpha * activation(H).
// With tanh this lands in [0, alpha); confident (low-entropy) steps get a
// weaker watermark.
inline double lambda_factor(const ProbabilityDistribution& dist, const WatermarkConfig& cfg) {
    const double h = entropy(dist);
    switch (cfg.activation) {
        case Activation::kTanh: return cfg.alpha * std::tanh(h);
        case Activation::kSigmoid: return cfg.alpha * (1.0 / (1.0 + std::exp(-h)));
        case Activation::kRelu: return cfg.alpha * h;
    }
    throw std::logic_error("lambda_factor: unknown activation");
}

namespace detail {

// Per-layer bit tables of the family a group uses for one message bit.
// Complementary scheme: bit 1 flips the base family pointwise. Independent
// scheme: bit 1 switches to the separately salted family instead.
inline void fill_group_bits(const GValueFamilySet& fams, SeedValue seed, int group, int bit,
                            FamilyScheme scheme, std::vector<std::vector<std::uint8_t>>& out,
                            bool& invert) {
    const int variant =
        (scheme == FamilyScheme::kIndependent && bit == 1) ? kIndependentFamily : kBaseFamily;
    invert = (scheme == FamilyScheme::kComplementary && bit == 1);
    out.resize(fams.layers());
    for (int layer = 0; layer < fams.layers(); ++layer) {
        out[layer].resize(fams.vocab_size());
        fams.fill_bits(seed, layer, group, variant, out[layer]);
    }
}

inline TokenId sample_index(const ProbabilityDistribution& dist, SplitMix64& rng) {
    const double u = rng.uniform01();
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const double p = dist[i];
        if (p > 0.0) last_positive = i;
        acc += p;
        if (u < acc) return static_cast<TokenId>(i);
    }
    return static_cast<TokenId>(last_positive);
}

inline SplitMix64 step_engine(std::uint64_t rng_seed, int step) {
    return SplitMix64(mix64(rng_seed ^ mix64(static_cast<std::uint64_t>(step) ^ kStepDomain)));
}

}  // namespace detail

// Single-group path: the watermarked distribution is the m-layer tournament
// law under the family selected by the message bit (bit 0 -> base family,
// bit 1 -> complementary family).
inline ProbabilityDistribution embed_step_k1(const ProbabilityDistribution& dist, SeedValue seed,
                                             int bit, const WatermarkConfig& cfg,
                                             const GValueFamilySet& fams) {
    if (bit != 0 && bit != 1) throw std::invalid_argument("embed_step_k1: bit must be 0 or 1");
    std::vector<std::vector<std::uint8_t>> bits;
    bool invert = false;
    detail::fill_group_bits(fams, seed, 0, bit, cfg.family_scheme, bits, invert);
    return vectorized_multi_layer(dist, bits, cfg.leaves_n, invert);
}

// Raw (unnormalized, possibly negative) champion scores for a k-bit symbol.
// components holds [q_0, qbar_0, q_1, qbar_1, ...]: for each group the
// distribution of its base family and of its bit-1 family. Selected-family
// mass is summed, lambda times the opposing mass subtracted.
inline std::vector<double> combine_k_scores(std::span<const ProbabilityDistribution> components,
                                            std::span<const std::uint8_t> symbol_bits,
                                            double lambda) {
    if (components.size() != 2 * symbol_bits.size())
        throw std::invalid_argument("combine_k_scores: need exactly 2k component distributions");
    if (components.empty()) throw std::invalid_argument("combine_k_scores: empty input");
    const std::size_t vocab = components[0].size();
    for (const auto& c : components)
        if (c.size() != vocab) throw std::invalid_argument("combine_k_scores: size mismatch");

    std::vector<double> raw(vocab, 0.0);
    for (std::size_t j = 0; j < symbol_bits.size(); ++j) {
        const ProbabilityDistribution& base = components[2 * j];
        const ProbabilityDistribution& alt = components[2 * j + 1];
        const ProbabilityDistribution& selected = symbol_bits[j] ? alt : base;
        const ProbabilityDistribution& opposing = symbol_bits[j] ? base : alt;
        for (std::size_t i = 0; i < vocab; ++i)
            raw[i] += selected[i] - lambda * opposing[i];
    }
    return raw;
}

// Zeroes any token that would complete an n-gram already present in the
// history, then renormalizes; if that removes all mass, the unfiltered
// distribution is returned. n = 0 disables the filter.
inline ProbabilityDistribution no_repeat_ngram_filter(std::span<const TokenId> history,
                                                      const ProbabilityDistribution& dist, int n) {
    if (n < 0) throw std::invalid_argument("no_repeat_ngram_filter: n must be >= 0");
    if (n == 0 || history.size() + 1 < static_cast<std::size_t>(n)) return dist;
    const std::size_t prefix_len = static_cast<std::size_t>(n) - 1;
    std::span<const TokenId> prefix = history.subspan(history.size() - prefix_len);

    std::vector<double> masked = dist.probs();
    double removed = 0.0;
    for (std::size_t i = 0; i + prefix_len < history.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < prefix_len; ++j)
            if (history[i + j] != prefix[j]) {
                match = false;
                break;
            }
        if (!match) continue;
        const TokenId banned = history[i + prefix_len];
        if (banned < masked.size() && masked[banned] > 0.0) {
            removed += masked[banned];
            masked[banned] = 0.0;
        }
    }
    if (removed == 0.0) return dist;
    double sum = 0.0;
    for (const double p : masked) sum += p;
    if (sum <= 0.0) return dist;  // everything banned: fall back unfiltered
    for (auto& p : masked) p /= sum;
    return ProbabilityDistribution(std::move(masked));
}

// KL(final || base) over the base support. Mass the score floor puts on
// tokens outside the base support (at most |V|*floor) is excluded so the
// proxy stays finite.
inline double kl_divergence(const ProbabilityDistribution& final_dist,
                            const ProbabilityDistribution& base_dist) {
    if (final_dist.size() != base_dist.size())
        throw std::invalid_argument("kl_divergence: size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < final_dist.size(); ++i) {
        const double p = final_dist[i];
        const double q = base_dist[i];
        if (p > 0.0 && q > 0.0) kl += p * std::log(p / q);
    }
    return kl < 0.0 ? 0.0 : kl;
}

namespace detail {

// Shared core of the watermarked and plain generation loops.
template <typename Lm, typename StepFn>
TokenSequence generate_loop(const Lm& lm, const TokenSequence& prompt, const EmbedOptions& opts,
                            StepFn&& per_step) {
    prompt.validate();
    std::vector<TokenId> tokens = prompt.tokens;
    tokens.reserve(tokens.size() + opts.max_new_tokens);
    for (int t = 0; t < opts.max_new_tokens; ++t) {
        ProbabilityDistribution base = lm.next_distribution(tokens);
        base = no_repeat_ngram_filter(tokens, base, opts.no_repeat_ngram);
        const TokenId tok = per_step(t, tokens, base);
        tokens.push_back(tok);
        if (opts.end_token && tok == *opts.end_token) break;
    }
    return TokenSequence{std::move(tokens), prompt.tokens.size()};
}

}  // namespace detail

// Full embedding pipeline. Per step: derive the window seed, optionally mask
// on a repeated seed (non-distortionary mode), pick the message position and
// its symbol bits, build the per-group tournament distributions, combine and
// renormalize (k = 1 short-circuits to the selected family's law), then
// sample the champion token with a deterministic per-step generator.
template <typename Lm>
    requires LanguageModelLike<Lm>
std::pair<TokenSequence, std::vector<StepTrace>> embed_sequence(const Lm& lm,
                                                                const TokenSequence& prompt,
                                                                const BitMessage& msg,
                                                                const WatermarkConfig& cfg,
                                                                const EmbedOptions& opts,
                                                                std::uint64_t rng_seed) {
    cfg.validate();
    if (static_cast<int>(msg.bits.size()) != cfg.message_bits)
        throw std::invalid_argument("embed_sequence: message length != configured message_bits");
    const SymbolMessage symbols = bits_to_symbols(msg, cfg.groups_k);
    const auto symbol_count = static_cast<std::uint32_t>(symbols.symbols.size());
    const int k = cfg.groups_k;

    const GValueFamilySet fams(k, cfg.layers_m, lm.vocab_size(),
                               cfg.family_scheme == FamilyScheme::kIndependent);
    SeedHistory history;
    std::vector<StepTrace> traces;
    traces.reserve(opts.max_new_tokens);

    std::vector<std::vector<std::uint8_t>> group_bits;
    std::vector<ProbabilityDistribution> components;

    auto per_step = [&](int t, const std::vector<TokenId>& tokens,
                        const ProbabilityDistribution& base) -> TokenId {
        StepTrace trace;
        trace.step = t;
        trace.seed = seed_at(tokens, tokens.size(), cfg.window_c, cfg.key);
        trace.base_entropy = entropy(base);
        trace.lambda = opts.fixed_lambda ? *opts.fixed_lambda : lambda_factor(base, cfg);
        trace.masked = cfg.gvalue_mode == GValueMode::kNonDistortionary &&
                       history.test_and_record(trace.seed);
        trace.position = assign_position(trace.seed, cfg.key, symbol_count);
        trace.symbol = symbols.symbols[trace.position];

        SplitMix64 engine = detail::step_engine(rng_seed, t);
        if (trace.masked) {
            trace.token = detail::sample_index(base, engine);
            traces.push_back(trace);
            return trace.token;
        }

        ProbabilityDistribution final_dist = [&] {
            if (k == 1) {
                const int bit = static_cast<int>(trace.symbol & 1u);
                return embed_step_k1(base, trace.seed, bit, cfg, fams);
            }
            components.clear();
            std::vector<std::uint8_t> bits(k);
            for (int j = 0; j < k; ++j)
                bits[j] = static_cast<std::uint8_t>((trace.symbol >> (k - 1 - j)) & 1u);
            bool invert = false;
            for (int j = 0; j < k; ++j) {
                detail::fill_group_bits(fams, trace.seed, j, 0, cfg.family_scheme, group_bits, invert);
                components.push_back(vectorized_multi_layer(base, group_bits, cfg.leaves_n, false));
                if (cfg.family_scheme == FamilyScheme::kComplementary) {
                    components.push_back(vectorized_multi_layer(base, group_bits, cfg.leaves_n, true));
                } else {
                    detail::fill_group_bits(fams, trace.seed, j, 1, cfg.family_scheme, group_bits,
                                            invert);
                    components.push_back(
                        vectorized_multi_layer(base, group_bits, cfg.leaves_n, false));
                }
            }
            const std::vector<double> raw = combine_k_scores(components, bits, trace.lambda);
            return normalize(raw, cfg.score_floor);
        }();

        trace.token = detail::sample_index(final_dist, engine);
        trace.kl_to_base = kl_divergence(final_dist, base);
        traces.push_back(trace);
        return trace.token;
    };

    TokenSequence seq = detail::generate_loop(lm, prompt, opts, per_step);
    return {std::move(seq), std::move(traces)};
}

// Paired unwatermarked arm: identical generation loop and per-step engines,
// no watermark transform.
template <typename Lm>
    requires LanguageModelLike<Lm>
TokenSequence generate_unwatermarked(const Lm& lm, const TokenSequence& prompt,
                                     const EmbedOptions& opts, std::uint64_t rng_seed) {
    auto per_step = [&](int t, const std::vector<TokenId>&,
                        const ProbabilityDistribution& base) -> TokenId {
        SplitMix64 engine = detail::step_engine(rng_seed, t);
        return detail::sample_index(base, engine);
    };
    return detail::generate_loop(lm, prompt, opts, per_step);
}

}  // namespace tourmark
