#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tourmark/core.hpp"
#include "tourmark/rng.hpp"

namespace tourmark {

inline constexpr TokenId kStartToken = 0;
inline constexpr std::uint64_t kModelDomain = 0x33D61C405A9B17EFULL;
inline constexpr const char* kToyLmSchema = "tourmark.toylm.v1";

// Order-1 Markov model with one Dirichlet-drawn row per context token.
// Stands in for a real language model at desk scale: the concentration knob
// dials row entropy (large -> near-uniform rows, small -> peaked rows) and
// the temperature applies probability-power tempering p^(1/T). Construction
// is bit-deterministic in (vocab, concentration, model_seed) on every
// platform.
class MarkovModel {
public:
    static MarkovModel build(std::uint32_t vocab, double concentration, std::uint64_t model_seed) {
        if (vocab < 2) throw std::invalid_argument("toy lm: vocab must be >= 2");
        if (!(concentration > 0.0)) throw std::invalid_argument("toy lm: concentration must be > 0");
        MarkovModel m;
        m.vocab_ = vocab;
        m.concentration_ = concentration;
        m.model_seed_ = model_seed;
        m.rows_.resize(vocab);
        for (std::uint32_t ctx = 0; ctx < vocab; ++ctx) {
            SplitMix64 rng(mix64(model_seed ^ kModelDomain ^ (static_cast<std::uint64_t>(ctx) + 1)));
            m.rows_[ctx] = dirichlet(rng, vocab, concentration);
        }
        m.apply_temperature(1.0);
        return m;
    }

    // Exactly uniform rows; handy where the entropy must equal ln(vocab).
    static MarkovModel uniform(std::uint32_t vocab) {
        if (vocab < 2) throw std::invalid_argument("toy lm: vocab must be >= 2");
        MarkovModel m;
        m.vocab_ = vocab;
        m.concentration_ = 0.0;
        m.model_seed_ = 0;
        m.rows_.assign(vocab, std::vector<double>(vocab, 1.0 / vocab));
        m.apply_temperature(1.0);
        return m;
    }

    void set_temperature(double temperature) {
        if (!(temperature > 0.0)) throw std::invalid_argument("toy lm: temperature must be > 0");
        apply_temperature(temperature);
    }

    [[nodiscard]] std::uint32_t vocab_size() const noexcept { return vocab_; }
    [[nodiscard]] double concentration() const noexcept { return concentration_; }
    [[nodiscard]] std::uint64_t model_seed() const noexcept { return model_seed_; }
    [[nodiscard]] double temperature() const noexcept { return temperature_; }

    // Row of the last history token, tempered. Empty histories read the row
    // of the fixed start token.
    [[nodiscard]] ProbabilityDistribution next_distribution(std::span<const TokenId> history) const {
        return ProbabilityDistribution(tempered_row(context_of(history)));
    }

    // Fast sampling path for unwatermarked generation (no distribution copy).
    [[nodiscard]] TokenId sample_next(std::span<const TokenId> history, SplitMix64& rng) const {
        const auto& cdf = cdf_rows_[context_of(history)];
        const double u = rng.uniform01() * cdf.back();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const std::size_t idx = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
        return static_cast<TokenId>(idx);
    }

    [[nodiscard]] double row_entropy(TokenId context) const { return row_entropies_[context]; }

    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = kToyLmSchema;
        j["vocab"] = vocab_;
        j["concentration"] = concentration_;
        j["model_seed"] = model_seed_;
        j["temperature"] = temperature_;
        j["rows"] = rows_;
        return j;
    }

    static MarkovModel from_json(const nlohmann::json& j) {
        if (j.value("schema", "") != kToyLmSchema)
            throw std::invalid_argument("toy lm: unsupported schema");
        MarkovModel m;
        m.vocab_ = j.at("vocab").get<std::uint32_t>();
        m.concentration_ = j.at("concentration").get<double>();
        m.model_seed_ = j.at("model_seed").get<std::uint64_t>();
        m.rows_ = j.at("rows").get<std::vector<std::vector<double>>>();
        if (m.rows_.size() != m.vocab_) throw std::invalid_argument("toy lm: row count mismatch");
        for (const auto& row : m.rows_)
            if (row.size() != m.vocab_) throw std::invalid_argument("toy lm: row size mismatch");
        m.apply_temperature(j.value("temperature", 1.0));
        return m;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("toy lm: cannot write " + path);
        out << to_json().dump();
    }

    static MarkovModel load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("toy lm: cannot read " + path);
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }

    // Loads the persisted model when it matches (vocab, concentration,
    // model_seed); otherwise rebuilds and overwrites the file.
    static MarkovModel load_or_build(const std::string& path, std::uint32_t vocab,
                                     double concentration, std::uint64_t model_seed) {
        if (std::ifstream probe(path); probe) {
            try {
                MarkovModel m = load(path);
                if (m.vocab_ == vocab && m.concentration_ == concentration &&
                    m.model_seed_ == model_seed)
                    return m;
            } catch (const std::exception&) {
                // fall through to rebuild
            }
        }
        MarkovModel m = build(vocab, concentration, model_seed);
        m.save(path);
        return m;
    }

private:
    [[nodiscard]] TokenId context_of(std::span<const TokenId> history) const {
        if (history.empty()) return kStartToken;
        const TokenId last = history.back();
        if (last >= vocab_) throw std::invalid_argument("toy lm: history token outside vocabulary");
        return last;
    }

    [[nodiscard]] const std::vector<double>& tempered_row(TokenId ctx) const {
        return tempered_rows_[ctx];
    }

    void apply_temperature(double temperature) {
        temperature_ = temperature;
        tempered_rows_.assign(vocab_, {});
        cdf_rows_.assign(vocab_, {});
        row_entropies_.assign(vocab_, 0.0);
        for (std::uint32_t ctx = 0; ctx < vocab_; ++ctx) {
            const auto& raw = rows_[ctx];
            std::vector<double> t(vocab_);
            if (temperature == 1.0) {
                t = raw;
            } else {
                // log-domain tempering keeps extreme temperatures stable
                double max_l = -1e300;
                for (const double p : raw)
                    if (p > 0.0) max_l = std::max(max_l, std::log(p) / temperature);
                double sum = 0.0;
                for (std::uint32_t i = 0; i < vocab_; ++i) {
                    t[i] = raw[i] > 0.0 ? std::exp(std::log(raw[i]) / temperature - max_l) : 0.0;
                    sum += t[i];
                }
                for (auto& x : t) x /= sum;
            }
            double h = 0.0;
            for (const double p : t)
                if (p > 0.0) h -= p * std::log(p);
            row_entropies_[ctx] = h;
            std::vector<double> cdf(vocab_);
            double acc = 0.0;
            for (std::uint32_t i = 0; i < vocab_; ++i) {
                acc += t[i];
                cdf[i] = acc;
            }
            cdf_rows_[ctx] = std::move(cdf);
            tempered_rows_[ctx] = std::move(t);
        }
    }

    std::uint32_t vocab_ = 0;
    double concentration_ = 0.0;
    std::uint64_t model_seed_ = 0;
    double temperature_ = 1.0;
    std::vector<std::vector<double>> rows_;            // raw Dirichlet rows
    std::vector<std::vector<double>> tempered_rows_;   // after temperature
    std::vector<std::vector<double>> cdf_rows_;
    std::vector<double> row_entropies_;
};

// Average next-token entropy over plain (unwatermarked) generations; the
// desk-scale analogue of a per-sample token-entropy diagnostic.
inline double mean_step_entropy(const MarkovModel& model, int n_sequences, int length,
                                std::uint64_t rng_seed) {
    if (n_sequences < 1 || length < 1)
        throw std::invalid_argument("mean_step_entropy: need at least one sequence and step");
    double total = 0.0;
    long long steps = 0;
    for (int s = 0; s < n_sequences; ++s) {
        SplitMix64 rng(mix64(rng_seed ^ (static_cast<std::uint64_t>(s) + 0x51ED2701)));
        std::vector<TokenId> history;
        for (int t = 0; t < length; ++t) {
            const TokenId ctx = history.empty() ? kStartToken : history.back();
            total += model.row_entropy(ctx);
            ++steps;
            history.push_back(model.sample_next(history, rng));
        }
    }
    return total / static_cast<double>(steps);
}

}  // namespace tourmark
