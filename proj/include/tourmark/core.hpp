#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tourmark {

using TokenId = std::uint32_t;

// Normalized probability vector over a vocabulary. Every sampling transform
// in the library maps one of these to another of the same kind. Invariants
// (entries >= 0, sum within 1e-9 of 1) are checked on construction.
class ProbabilityDistribution {
public:
    static constexpr double kSumTolerance = 1e-9;

    explicit ProbabilityDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.empty()) throw std::invalid_argument("distribution must be non-empty");
        double sum = 0.0;
        for (const double p : probs_) {
            if (!std::isfinite(p) || p < 0.0)
                throw std::invalid_argument("distribution entries must be finite and non-negative");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kSumTolerance)
            throw std::invalid_argument("distribution must sum to 1 (got " + std::to_string(sum) + ")");
    }

    [[nodiscard]] std::size_t size() const noexcept { return probs_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return probs_[i]; }
    [[nodiscard]] const std::vector<double>& probs() const noexcept { return probs_; }

private:
    std::vector<double> probs_;
};

// Clamp-and-renormalize of raw (possibly negative) scores. Softmax of
// log-scores is proportional normalization, so this single op covers the
// clamp -> log -> softmax path; the floor keeps nonpositive scores
// representable without producing zeros or NaNs.
inline ProbabilityDistribution normalize(std::span<const double> raw_scores, double floor) {
    if (raw_scores.empty()) throw std::invalid_argument("normalize: empty score vector");
    if (!(floor > 0.0)) throw std::invalid_argument("normalize: floor must be positive");
    std::vector<double> clamped(raw_scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < raw_scores.size(); ++i) {
        if (!std::isfinite(raw_scores[i]))
            throw std::invalid_argument("normalize: non-finite score at index " + std::to_string(i));
        clamped[i] = std::max(raw_scores[i], floor);
        sum += clamped[i];
    }
    for (auto& x : clamped) x /= sum;
    return ProbabilityDistribution(std::move(clamped));
}

// Shannon entropy in nats; zero-probability terms contribute zero.
inline double entropy(const ProbabilityDistribution& dist) {
    double h = 0.0;
    for (const double p : dist.probs())
        if (p > 0.0) h -= p * std::log(p);
    return h < 0.0 ? 0.0 : h;
}

// b-bit payload, each entry 0 or 1.
struct BitMessage {
    std::vector<std::uint8_t> bits;

    [[nodiscard]] bool operator==(const BitMessage&) const = default;
};

// 2^k-ary reparameterization of a BitMessage: B = b/k symbols, the first bit
// of each k-bit chunk being the most significant.
struct SymbolMessage {
    std::vector<std::uint32_t> symbols;
    int bits_per_symbol = 1;

    [[nodiscard]] bool operator==(const SymbolMessage&) const = default;
};

inline void check_bits(const BitMessage& msg) {
    if (msg.bits.empty()) throw std::invalid_argument("message must be non-empty");
    for (const auto b : msg.bits)
        if (b > 1) throw std::invalid_argument("message bits must be 0 or 1");
}

inline SymbolMessage bits_to_symbols(const BitMessage& msg, int k) {
    check_bits(msg);
    if (k < 1 || k > 16) throw std::invalid_argument("bits per symbol must be in [1, 16]");
    if (msg.bits.size() % static_cast<std::size_t>(k) != 0)
        throw std::invalid_argument("message length must be a multiple of the symbol width");
    SymbolMessage out;
    out.bits_per_symbol = k;
    out.symbols.reserve(msg.bits.size() / k);
    for (std::size_t p = 0; p < msg.bits.size(); p += k) {
        std::uint32_t sym = 0;
        for (int j = 0; j < k; ++j) sym |= static_cast<std::uint32_t>(msg.bits[p + j]) << (k - 1 - j);
        out.symbols.push_back(sym);
    }
    return out;
}

inline BitMessage symbols_to_bits(const SymbolMessage& msg) {
    const int k = msg.bits_per_symbol;
    if (k < 1 || k > 16) throw std::invalid_argument("bits per symbol must be in [1, 16]");
    BitMessage out;
    out.bits.reserve(msg.symbols.size() * k);
    for (const auto sym : msg.symbols) {
        if (sym >> k) throw std::invalid_argument("symbol out of range for width");
        for (int j = 0; j < k; ++j) out.bits.push_back(static_cast<std::uint8_t>((sym >> (k - 1 - j)) & 1u));
    }
    return out;
}

enum class Activation { kTanh, kSigmoid, kRelu };
enum class GValueMode { kDistortionary, kNonDistortionary };

// How the "bit = 1" score family relates to the "bit = 0" family.
// kComplementary is the production scheme (second family is 1 - g);
// kIndependent swaps in an unrelated pseudo-random family and exists for the
// ablation harness. Part of the compatibility contract: embedder and decoder
// must agree on it.
enum class FamilyScheme { kComplementary, kIndependent };

// All embedding/decoding hyperparameters. The key, mixer constants, group
// salts, window size, layer/group counts and family scheme together define
// the wire format; two parties must share an identical config to exchange
// watermarked text.
struct WatermarkConfig {
    std::uint64_t key = 0;
    int window_c = 2;
    int layers_m = 30;
    int leaves_n = 2;
    int groups_k = 1;
    double alpha = 1.2;
    Activation activation = Activation::kTanh;
    int message_bits = 16;
    GValueMode gvalue_mode = GValueMode::kDistortionary;
    FamilyScheme family_scheme = FamilyScheme::kComplementary;
    double score_floor = 1e-12;

    [[nodiscard]] int symbol_count() const { return message_bits / groups_k; }

    void validate() const {
        if (window_c < 1) throw std::invalid_argument("config: window_c must be >= 1");
        if (layers_m < 1 || layers_m > 4095) throw std::invalid_argument("config: layers_m out of range");
        if (leaves_n < 2) throw std::invalid_argument("config: leaves_n must be >= 2");
        if (groups_k < 1 || groups_k > 16) throw std::invalid_argument("config: groups_k out of range");
        if (alpha < 0.0) throw std::invalid_argument("config: alpha must be non-negative");
        if (message_bits < 1) throw std::invalid_argument("config: message_bits must be positive");
        if (message_bits % groups_k != 0)
            throw std::invalid_argument("config: message_bits must be a multiple of groups_k");
        if (!(score_floor > 0.0)) throw std::invalid_argument("config: score_floor must be positive");
    }
};

// Token sequence with the number of leading prompt tokens recorded so
// downstream consumers can score only generated tokens while still using the
// prompt as left context.
struct TokenSequence {
    std::vector<TokenId> tokens;
    std::size_t prompt_len = 0;

    [[nodiscard]] std::size_t size() const noexcept { return tokens.size(); }
    [[nodiscard]] std::size_t generated_len() const noexcept { return tokens.size() - prompt_len; }

    void validate() const {
        if (prompt_len > tokens.size())
            throw std::invalid_argument("sequence: prompt_len exceeds token count");
    }

    [[nodiscard]] bool operator==(const TokenSequence&) const = default;
};

}  // namespace tourmark
