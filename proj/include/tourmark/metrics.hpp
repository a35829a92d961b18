#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tourmark/core.hpp"

namespace tourmark {

// AUROC in its Mann-Whitney form: P(pos > neg) + 0.5 * P(pos == neg),
// computed exactly via midranks (ties get the tie convention).
inline double compute_auc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
    if (pos_scores.empty() || neg_scores.empty())
        throw std::invalid_argument("compute_auc: both score lists must be non-empty");
    struct Item {
        double score;
        bool positive;
    };
    std::vector<Item> all;
    all.reserve(pos_scores.size() + neg_scores.size());
    for (const double s : pos_scores) all.push_back({s, true});
    for (const double s : neg_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t t = i; t < j; ++t)
            if (all[t].positive) rank_sum_pos += midrank;
        i = j;
    }
    const double n_pos = static_cast<double>(pos_scores.size());
    const double n_neg = static_cast<double>(neg_scores.size());
    return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

// Maximum F1 of the classifier "score >= threshold => watermarked" over all
// distinct-score thresholds.
inline double compute_best_f1(std::span<const double> pos_scores,
                              std::span<const double> neg_scores) {
    if (pos_scores.empty() || neg_scores.empty())
        throw std::invalid_argument("compute_best_f1: both score lists must be non-empty");
    struct Item {
        double score;
        bool positive;
    };
    std::vector<Item> all;
    all.reserve(pos_scores.size() + neg_scores.size());
    for (const double s : pos_scores) all.push_back({s, true});
    for (const double s : neg_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(),
              [](const Item& a, const Item& b) { return a.score > b.score; });

    const double total_pos = static_cast<double>(pos_scores.size());
    double best = 0.0;
    double tp = 0.0;
    double fp = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        for (std::size_t t = i; t < j; ++t)
            (all[t].positive ? tp : fp) += 1.0;
        // threshold = this score: everything at or above it is classified positive
        const double fn = total_pos - tp;
        const double f1 = 2.0 * tp / (2.0 * tp + fp + fn);
        best = std::max(best, f1);
        i = j;
    }
    return best;
}

inline double bit_accuracy(const BitMessage& truth, const BitMessage& decoded) {
    if (truth.bits.size() != decoded.bits.size())
        throw std::invalid_argument("bit_accuracy: length mismatch");
    if (truth.bits.empty()) throw std::invalid_argument("bit_accuracy: empty messages");
    std::size_t match = 0;
    for (std::size_t i = 0; i < truth.bits.size(); ++i)
        if (truth.bits[i] == decoded.bits[i]) ++match;
    return static_cast<double>(match) / static_cast<double>(truth.bits.size());
}

// Fraction of (truth, decoded) pairs recovered exactly.
inline double me_rate(std::span<const std::pair<BitMessage, BitMessage>> pairs) {
    if (pairs.empty()) throw std::invalid_argument("me_rate: no pairs");
    std::size_t exact = 0;
    for (const auto& [truth, decoded] : pairs)
        if (truth.bits == decoded.bits) ++exact;
    return static_cast<double>(exact) / static_cast<double>(pairs.size());
}

}  // namespace tourmark
