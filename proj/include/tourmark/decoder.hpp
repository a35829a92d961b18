#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tourmark/core.hpp"
#include "tourmark/gvalue.hpp"
#include "tourmark/keying.hpp"

namespace tourmark {

inline constexpr const char* kReportSchema = "tourmark.report.v1";

// Mean g-scores per (message position, group) cell, plus the raw signed sum
// needed by the standardized detector. s_bar is exactly 1 - s under the
// complementary scheme, or the independent family's mean under the ablation
// scheme. Cells with no tokens carry s = s_bar = 0.5 and n = 0.
struct PositionGroupScores {
    int symbol_count = 0;   // B
    int groups_k = 0;
    int layers_m = 0;
    std::vector<long long> tokens_per_position;  // n_p, size B
    std::vector<double> s;                       // size B*k, cell (p, j) at p*k + j
    std::vector<double> s_bar;
    long long tokens_used = 0;
    double signed_sum_group0 = 0.0;  // sum of (2g - 1) over used token-layer pairs, group 0
    double weight_sq_sum = 0.0;      // sum of squared layer weights (= m when unweighted)

    [[nodiscard]] double cell_s(int p, int j) const { return s[static_cast<std::size_t>(p) * groups_k + j]; }
    [[nodiscard]] double cell_s_bar(int p, int j) const {
        return s_bar[static_cast<std::size_t>(p) * groups_k + j];
    }
};

// Non-increasing per-layer weights, linear from tau down to mu, rescaled so
// they sum to m. tau = mu reproduces the unweighted mean.
inline std::vector<double> layer_weights(int m, double tau, double mu) {
    if (m < 1) throw std::invalid_argument("layer_weights: m must be >= 1");
    if (m == 1) {
        if (tau != mu) throw std::invalid_argument("layer_weights: m = 1 requires tau == mu");
        return {1.0};
    }
    if (tau < mu) throw std::invalid_argument("layer_weights: tau must be >= mu");
    std::vector<double> w(m);
    double sum = 0.0;
    for (int l = 0; l < m; ++l) {
        w[l] = tau - static_cast<double>(l) * (tau - mu) / (m - 1);
        sum += w[l];
    }
    const double scale = static_cast<double>(m) / sum;
    for (auto& x : w) x *= scale;
    return w;
}

// Recomputes each token's (seed, position) exactly as the embedder does and
// accumulates per-cell mean g-values. Tokens before text.prompt_len supply
// context only. In non-distortionary mode tokens with a previously seen seed
// are skipped, mirroring the embedder's masking. Optional layer weights
// (size m, summing to m) produce the weighted-mean variant.
inline PositionGroupScores score_positions(const TokenSequence& text, const WatermarkConfig& cfg,
                                           std::span<const double> weights = {}) {
    cfg.validate();
    text.validate();
    if (!weights.empty() && weights.size() != static_cast<std::size_t>(cfg.layers_m))
        throw std::invalid_argument("score_positions: weight count != layers");

    const int k = cfg.groups_k;
    const int m = cfg.layers_m;
    const auto symbol_count = static_cast<std::uint32_t>(cfg.symbol_count());

    PositionGroupScores out;
    out.symbol_count = static_cast<int>(symbol_count);
    out.groups_k = k;
    out.layers_m = m;
    out.tokens_per_position.assign(symbol_count, 0);
    std::vector<double> sums(static_cast<std::size_t>(symbol_count) * k, 0.0);
    std::vector<double> sums_bar(static_cast<std::size_t>(symbol_count) * k, 0.0);
    out.weight_sq_sum = 0.0;
    for (int l = 0; l < m; ++l) {
        const double w = weights.empty() ? 1.0 : weights[l];
        out.weight_sq_sum += w * w;
    }

    SeedHistory history;
    const std::span<const TokenId> tokens(text.tokens);
    for (std::size_t t = text.prompt_len; t < tokens.size(); ++t) {
        const SeedValue seed = seed_at(tokens, t, cfg.window_c, cfg.key);
        if (cfg.gvalue_mode == GValueMode::kNonDistortionary && history.test_and_record(seed))
            continue;
        const std::uint32_t p = assign_position(seed, cfg.key, symbol_count);
        out.tokens_per_position[p] += 1;
        out.tokens_used += 1;
        const TokenId tok = tokens[t];
        for (int j = 0; j < k; ++j) {
            double acc = 0.0;
            double acc_bar = 0.0;
            for (int l = 0; l < m; ++l) {
                const double w = weights.empty() ? 1.0 : weights[l];
                const int g = g_value(tok, seed, l, j);
                acc += w * g;
                if (cfg.family_scheme == FamilyScheme::kIndependent)
                    acc_bar += w * g_value_variant(tok, seed, l, j, kIndependentFamily);
                if (j == 0 && weights.empty()) out.signed_sum_group0 += 2 * g - 1;
            }
            sums[p * k + j] += acc;
            if (cfg.family_scheme == FamilyScheme::kIndependent) sums_bar[p * k + j] += acc_bar;
        }
        if (!weights.empty()) {
            // signed statistic stays unweighted by definition
            for (int l = 0; l < m; ++l)
                out.signed_sum_group0 += 2 * g_value(tok, seed, l, 0) - 1;
        }
    }

    out.s.assign(sums.size(), 0.5);
    out.s_bar.assign(sums.size(), 0.5);
    for (std::uint32_t p = 0; p < symbol_count; ++p) {
        const long long n = out.tokens_per_position[p];
        if (n == 0) continue;  // empty positions keep the 0.5 sentinel
        for (int j = 0; j < k; ++j) {
            const double denom = static_cast<double>(m) * static_cast<double>(n);
            const double sj = sums[p * k + j] / denom;
            out.s[p * k + j] = sj;
            out.s_bar[p * k + j] = cfg.family_scheme == FamilyScheme::kIndependent
                                       ? sums_bar[p * k + j] / denom
                                       : 1.0 - sj;
        }
    }
    return out;
}

// Confidence-aware symbol recovery: bit j of symbol p is 1 iff s < s_bar
// (ties decode as 0); empty positions decode as symbol 0 and show up in the
// report's coverage.
inline SymbolMessage decode_confidence(const PositionGroupScores& scores) {
    SymbolMessage out;
    out.bits_per_symbol = scores.groups_k;
    out.symbols.reserve(scores.symbol_count);
    for (int p = 0; p < scores.symbol_count; ++p) {
        std::uint32_t sym = 0;
        if (scores.tokens_per_position[p] > 0) {
            for (int j = 0; j < scores.groups_k; ++j)
                if (scores.cell_s(p, j) < scores.cell_s_bar(p, j))
                    sym |= 1u << (scores.groups_k - 1 - j);
        }
        out.symbols.push_back(sym);
    }
    return out;
}

// Per-position vote counts of the counting-based baseline decoder.
struct CountingMatrix {
    int symbol_count = 0;
    int alphabet = 0;  // 2^k
    std::vector<long long> votes;  // row-major B x 2^k

    [[nodiscard]] long long at(int p, int v) const {
        return votes[static_cast<std::size_t>(p) * alphabet + v];
    }
};

struct CountingDecodeResult {
    SymbolMessage symbols;
    CountingMatrix matrix;
};

// Hard per-token vote: the symbol whose selected-family layer sum is maximal
// (ties toward the smaller symbol index) gets one vote; majority per
// position, same tie rule.
inline CountingDecodeResult decode_counting(const TokenSequence& text, const WatermarkConfig& cfg) {
    cfg.validate();
    text.validate();
    if (cfg.groups_k > 8) throw std::invalid_argument("decode_counting: groups_k > 8 unsupported");
    const int k = cfg.groups_k;
    const int m = cfg.layers_m;
    const int alphabet = 1 << k;
    const auto symbol_count = static_cast<std::uint32_t>(cfg.symbol_count());

    CountingDecodeResult out;
    out.matrix.symbol_count = static_cast<int>(symbol_count);
    out.matrix.alphabet = alphabet;
    out.matrix.votes.assign(static_cast<std::size_t>(symbol_count) * alphabet, 0);

    SeedHistory history;
    const std::span<const TokenId> tokens(text.tokens);
    for (std::size_t t = text.prompt_len; t < tokens.size(); ++t) {
        const SeedValue seed = seed_at(tokens, t, cfg.window_c, cfg.key);
        if (cfg.gvalue_mode == GValueMode::kNonDistortionary && history.test_and_record(seed))
            continue;
        const std::uint32_t p = assign_position(seed, cfg.key, symbol_count);
        const TokenId tok = tokens[t];

        std::vector<int> layer_sum(k, 0);
        std::vector<int> layer_sum_alt(k, 0);
        for (int j = 0; j < k; ++j)
            for (int l = 0; l < m; ++l) {
                layer_sum[j] += g_value(tok, seed, l, j);
                if (cfg.family_scheme == FamilyScheme::kIndependent)
                    layer_sum_alt[j] += g_value_variant(tok, seed, l, j, kIndependentFamily);
            }

        int best_symbol = 0;
        long long best_score = -1;
        for (int v = 0; v < alphabet; ++v) {
            long long score = 0;
            for (int j = 0; j < k; ++j) {
                const int bit = (v >> (k - 1 - j)) & 1;
                const int sel = bit ? (cfg.family_scheme == FamilyScheme::kIndependent
                                           ? layer_sum_alt[j]
                                           : m - layer_sum[j])
                                    : layer_sum[j];
                score += sel;
            }
            if (score > best_score) {
                best_score = score;
                best_symbol = v;
            }
        }
        out.matrix.votes[p * alphabet + best_symbol] += 1;
    }

    out.symbols.bits_per_symbol = k;
    out.symbols.symbols.reserve(symbol_count);
    for (std::uint32_t p = 0; p < symbol_count; ++p) {
        int best = 0;
        long long best_votes = -1;
        for (int v = 0; v < alphabet; ++v)
            if (out.matrix.at(p, v) > best_votes) {
                best_votes = out.matrix.at(p, v);
                best = v;
            }
        out.symbols.symbols.push_back(static_cast<std::uint32_t>(best));
    }
    return out;
}

// Message-aware standardized statistic over group 0: with the signed score
// d = 2g - 1 per token-layer pair, z = sqrt(m*T) * mean(d). Asymptotically
// standard normal on unwatermarked text; empty input yields 0 by convention.
inline double z_signed(const PositionGroupScores& scores) {
    if (scores.tokens_used == 0) return 0.0;
    const double pairs = static_cast<double>(scores.layers_m) * scores.tokens_used;
    return scores.signed_sum_group0 / std::sqrt(pairs);
}

// Blind (message-agnostic) statistic: per occupied cell the margin
// u = |s - 0.5| is standardized against the half-normal law it follows under
// the null (mean sigma*sqrt(2/pi), sd sigma*sqrt(1 - 2/pi), with
// sigma = sqrt(sum w^2) / (2 m sqrt(n_p))), and the standardized values are
// averaged with a 1/sqrt(cells) scaling. Larger means more watermark-like
// regardless of which bits were embedded.
inline double z_folded(const PositionGroupScores& scores) {
    constexpr double kHalfNormalMean = 0.7978845608028654;      // sqrt(2/pi)
    constexpr double kHalfNormalSd = 0.6028102749890869;        // sqrt(1 - 2/pi)
    double sum = 0.0;
    long long cells = 0;
    for (int p = 0; p < scores.symbol_count; ++p) {
        const long long n = scores.tokens_per_position[p];
        if (n == 0) continue;
        const double sigma = std::sqrt(scores.weight_sq_sum) /
                             (2.0 * scores.layers_m * std::sqrt(static_cast<double>(n)));
        for (int j = 0; j < scores.groups_k; ++j) {
            const double u = std::abs(scores.cell_s(p, j) - 0.5);
            sum += (u - sigma * kHalfNormalMean) / (sigma * kHalfNormalSd);
            ++cells;
        }
    }
    if (cells == 0) return 0.0;
    return sum / std::sqrt(static_cast<double>(cells));
}

// Plain and layer-weighted mean g-score over group 0 (detector ablations).
inline double weighted_mean_score(const TokenSequence& text, const WatermarkConfig& cfg,
                                  double tau = 10.0, double mu = 1.0) {
    const std::vector<double> w = layer_weights(cfg.layers_m, tau, mu);
    const PositionGroupScores scores = score_positions(text, cfg, w);
    if (scores.tokens_used == 0) return 0.5;
    double acc = 0.0;
    for (int p = 0; p < scores.symbol_count; ++p)
        acc += scores.cell_s(p, 0) * static_cast<double>(scores.tokens_per_position[p]);
    return acc / static_cast<double>(scores.tokens_used);
}

// ---------------------------------------------------------------------------
// Hamming(7,4): one codeword per payload nibble; corrects any single bit flip
// per block. Layout: (p1 p2 d1 p3 d2 d3 d4), syndrome = 1-based error index.
// ---------------------------------------------------------------------------

inline BitMessage hamming_encode(const BitMessage& payload) {
    check_bits(payload);
    if (payload.bits.size() % 4 != 0)
        throw std::invalid_argument("hamming_encode: payload length must be a multiple of 4");
    BitMessage out;
    out.bits.reserve(payload.bits.size() / 4 * 7);
    for (std::size_t i = 0; i < payload.bits.size(); i += 4) {
        const int d1 = payload.bits[i], d2 = payload.bits[i + 1], d3 = payload.bits[i + 2],
                  d4 = payload.bits[i + 3];
        const int p1 = d1 ^ d2 ^ d4;
        const int p2 = d1 ^ d3 ^ d4;
        const int p3 = d2 ^ d3 ^ d4;
        for (const int b : {p1, p2, d1, p3, d2, d3, d4}) out.bits.push_back(static_cast<std::uint8_t>(b));
    }
    return out;
}

inline BitMessage hamming_decode(const BitMessage& code) {
    check_bits(code);
    if (code.bits.size() % 7 != 0)
        throw std::invalid_argument("hamming_decode: codeword length must be a multiple of 7");
    BitMessage out;
    out.bits.reserve(code.bits.size() / 7 * 4);
    for (std::size_t i = 0; i < code.bits.size(); i += 7) {
        std::array<int, 8> c{};  // 1-based positions
        for (int j = 0; j < 7; ++j) c[j + 1] = code.bits[i + j];
        const int s1 = c[1] ^ c[3] ^ c[5] ^ c[7];
        const int s2 = c[2] ^ c[3] ^ c[6] ^ c[7];
        const int s3 = c[4] ^ c[5] ^ c[6] ^ c[7];
        const int syndrome = s1 + 2 * s2 + 4 * s3;
        if (syndrome != 0) c[syndrome] ^= 1;
        for (const int pos : {3, 5, 6, 7}) out.bits.push_back(static_cast<std::uint8_t>(c[pos]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Full detection report
// ---------------------------------------------------------------------------

struct DetectionReport {
    BitMessage decoded_bits;
    SymbolMessage symbols;
    double z_signed = 0.0;
    double z_folded = 0.0;
    double weighted_mean = 0.0;
    double coverage = 0.0;                    // fraction of positions with tokens
    std::vector<double> position_margins;     // |s - 0.5| per cell, B*k
    std::vector<double> z_contributions;      // standardized folded value per cell
    std::vector<long long> tokens_per_position;
};

inline DetectionReport decode_text(const TokenSequence& text, const WatermarkConfig& cfg,
                                   double tau = 10.0, double mu = 1.0) {
    const PositionGroupScores scores = score_positions(text, cfg);
    DetectionReport report;
    report.symbols = decode_confidence(scores);
    report.decoded_bits = symbols_to_bits(report.symbols);
    report.z_signed = z_signed(scores);
    report.z_folded = z_folded(scores);
    report.weighted_mean = cfg.layers_m > 1 ? weighted_mean_score(text, cfg, tau, mu)
                                            : weighted_mean_score(text, cfg, 1.0, 1.0);
    report.tokens_per_position = scores.tokens_per_position;

    constexpr double kHalfNormalMean = 0.7978845608028654;
    constexpr double kHalfNormalSd = 0.6028102749890869;
    int occupied = 0;
    for (int p = 0; p < scores.symbol_count; ++p) {
        const long long n = scores.tokens_per_position[p];
        if (n > 0) ++occupied;
        for (int j = 0; j < scores.groups_k; ++j) {
            const double u = std::abs(scores.cell_s(p, j) - 0.5);
            report.position_margins.push_back(u);
            if (n > 0) {
                const double sigma = std::sqrt(scores.weight_sq_sum) /
                                     (2.0 * scores.layers_m * std::sqrt(static_cast<double>(n)));
                report.z_contributions.push_back((u - sigma * kHalfNormalMean) /
                                                 (sigma * kHalfNormalSd));
            } else {
                report.z_contributions.push_back(0.0);
            }
        }
    }
    report.coverage =
        scores.symbol_count == 0 ? 0.0 : static_cast<double>(occupied) / scores.symbol_count;
    return report;
}

inline std::string bits_to_string(const BitMessage& msg) {
    std::string s;
    s.reserve(msg.bits.size());
    for (const auto b : msg.bits) s.push_back(b ? '1' : '0');
    return s;
}

inline BitMessage bits_from_string(const std::string& s) {
    BitMessage msg;
    msg.bits.reserve(s.size());
    for (const char c : s) {
        if (c != '0' && c != '1') throw std::invalid_argument("bit string must contain only 0/1");
        msg.bits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return msg;
}

// Versioned JSON serialization; field names are part of the interface.
inline nlohmann::json report_to_json(const DetectionReport& report) {
    nlohmann::json j;
    j["schema"] = kReportSchema;
    j["decoded_bits"] = bits_to_string(report.decoded_bits);
    j["symbols"] = report.symbols.symbols;
    j["bits_per_symbol"] = report.symbols.bits_per_symbol;
    j["z_signed"] = report.z_signed;
    j["z_folded"] = report.z_folded;
    j["weighted_mean"] = report.weighted_mean;
    j["coverage"] = report.coverage;
    j["position_margins"] = report.position_margins;
    j["z_contributions"] = report.z_contributions;
    j["tokens_per_position"] = report.tokens_per_position;
    return j;
}

}  // namespace tourmark
