#pragma once

// Synthetic traces with known correctness. Non-abstaining items draw their
// outcome-token distribution from a peaked or a flat Dirichlet regime; the
// regime mixes with correctness according to the top-k signal strength.
// Abstentions (outcome 2/3) are always errors and, by default, look
// confident to the top-k features, so only the attribution family sees them.

#include "lppgate/common.hpp"
#include "lppgate/dataset.hpp"
#include "lppgate/schema.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

namespace lppgate {

struct SignalSpec {
    double topk = 0.6;                  // 0 = regime independent of z, 1 = regime reveals z
    bool abstentions_confident = true;  // abstentions use the peaked regime
    double verbalized = 0.0;            // how far p_correct tracks z, in [0,1]
    bool reasoning = false;             // emit three reasoning steps with token logprobs
    bool msp_sufficient = false;        // even tail, no surface split: top-k summaries depend on MSP alone
};

struct SynthConfig {
    std::size_t n_items = 3000;
    double error_rate = 0.15;
    double abstention_rate = 0.03;
    SignalSpec signal;
    std::uint64_t seed = kDefaultSeed;

    void validate() const {
        auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!unit(error_rate) || !unit(abstention_rate) || !unit(signal.topk) || !unit(signal.verbalized))
            throw Error(ErrorCode::InvalidArgument, "synthetic rates and strengths must be in [0,1]");
        if (abstention_rate > error_rate)
            throw Error(ErrorCode::InvalidArgument, "abstentions are errors; abstention_rate must not exceed error_rate");
        if (n_items == 0) throw Error(ErrorCode::InvalidArgument, "n_items must be positive");
    }

    // Named presets: none, msp-only, complementary, attribution-only.
    static SynthConfig preset(std::string_view name) {
        SynthConfig c;
        if (name == "complementary") return c;
        if (name == "none") {
            c.signal.topk = 0.0;
            c.abstention_rate = 0.0;
        } else if (name == "msp-only") {
            c.signal.topk = 1.0;
            c.signal.msp_sufficient = true;
            c.abstention_rate = 0.0;
        } else if (name == "attribution-only") {
            c.signal.topk = 0.0;
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown synthetic preset '" + std::string(name) + "'");
        }
        return c;
    }
};

struct SynthCorpus {
    std::vector<ResponseTrace> traces;
    std::vector<LabelRow> labels;
    std::vector<int> z;  // aligned with traces
};

namespace detail {

template <std::size_t N>
std::array<double, N> dirichlet(std::mt19937_64& rng, const std::array<double, N>& alpha) {
    std::array<double, N> g{};
    double sum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        std::gamma_distribution<double> gd(alpha[i], 1.0);
        g[i] = std::max(gd(rng), 1e-300);
        sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
}

// Label masses with the emitted label on top.
inline std::array<double, 4> label_masses(std::mt19937_64& rng, int emitted, bool peaked, bool even_tail = false) {
    std::array<double, 4> alpha{};
    for (int l = 0; l < 4; ++l) alpha[static_cast<std::size_t>(l)] = l == emitted ? (peaked ? 40.0 : 4.0) : (peaked ? 0.4 : 1.6);
    auto m = dirichlet(rng, alpha);
    const auto top = static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
    std::swap(m[top], m[static_cast<std::size_t>(emitted)]);
    if (even_tail) {
        const double top_mass = m[static_cast<std::size_t>(emitted)];
        for (std::size_t l = 0; l < 4; ++l)
            if (l != static_cast<std::size_t>(emitted)) m[l] = (1.0 - top_mass) / 3.0;
    }
    return m;
}

// Outcome token record: each label's mass (optionally split over "d" and
// " d"), plus two non-label tokens.
inline TokenRecord outcome_record(std::mt19937_64& rng, int emitted, const std::array<double, 4>& mass,
                                  bool split = true) {
    std::uniform_real_distribution<double> u(0.6, 0.95);
    std::vector<TokenCandidate> cands;
    const double label_total = 0.995;
    for (int l = 0; l < 4; ++l) {
        const double share = split ? u(rng) : 1.0;
        const double p = label_total * mass[static_cast<std::size_t>(l)];
        cands.push_back({std::to_string(l), std::log(std::max(p * share, 1e-300))});
        if (split) cands.push_back({" " + std::to_string(l), std::log(std::max(p * (1.0 - share), 1e-300))});
    }
    cands.push_back({"\"", std::log(0.003)});
    cands.push_back({"{", std::log(0.002)});
    TokenRecord rec;
    rec.span = Span::Outcome;
    const std::string surface = std::to_string(emitted);
    for (const auto& c : cands)
        if (c.surface == surface) rec.chosen = c;
    rec.candidates = std::move(cands);
    normalize_token_record(rec);
    return rec;
}

inline TokenRecord reasoning_record(std::mt19937_64& rng, bool peaked, std::size_t idx) {
    std::array<double, 5> alpha{};
    for (std::size_t i = 0; i < 5; ++i) alpha[i] = i == 0 ? (peaked ? 20.0 : 3.0) : (peaked ? 0.5 : 1.5);
    auto p = dirichlet(rng, alpha);
    std::sort(p.begin(), p.end(), std::greater<>());
    TokenRecord rec;
    rec.span = Span::Reasoning;
    for (std::size_t i = 0; i < 5; ++i)
        rec.candidates.push_back({"w" + std::to_string(idx) + "_" + std::to_string(i), std::log(0.99 * p[i])});
    rec.chosen = rec.candidates.front();
    normalize_token_record(rec);
    return rec;
}

inline ConfidenceBand band_for(int p) {
    if (p < 20) return ConfidenceBand::VL;
    if (p < 40) return ConfidenceBand::L;
    if (p < 60) return ConfidenceBand::M;
    if (p < 80) return ConfidenceBand::H;
    return ConfidenceBand::VH;
}

}  // namespace detail

inline std::string synth_item_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "item-%06zu", i);
    return buf;
}

inline SynthCorpus generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double err_given_answer =
        cfg.abstention_rate < 1.0 ? (cfg.error_rate - cfg.abstention_rate) / (1.0 - cfg.abstention_rate) : 0.0;

    SynthCorpus out;
    for (std::size_t i = 0; i < cfg.n_items; ++i) {
        ResponseTrace t;
        t.item_id = synth_item_id(i);
        LabelRow row;
        row.item_id = t.item_id;

        const bool abstain = u01(rng) < cfg.abstention_rate;
        int z = 0;
        int emitted = 0;
        bool peaked = false;
        if (abstain) {
            emitted = u01(rng) < 0.5 ? 2 : 3;
            peaked = cfg.signal.abstentions_confident || u01(rng) < 0.5;
            row.truth = u01(rng) < 0.5 ? GroundTruth::Violating : GroundTruth::NonViolating;
        } else {
            z = u01(rng) < err_given_answer ? 0 : 1;
            emitted = u01(rng) < 0.5 ? 1 : 0;
            const double p_peak = z == 1 ? 0.5 + 0.5 * cfg.signal.topk : 0.5 - 0.5 * cfg.signal.topk;
            peaked = u01(rng) < p_peak;
            const bool says_yes = emitted == 1;
            const bool truth_yes = z == 1 ? says_yes : !says_yes;
            row.truth = truth_yes ? GroundTruth::Violating : GroundTruth::NonViolating;
        }
        const auto label = *outcome_from_int(emitted);
        row.llm_outcome = label;
        t.structured.outcome = label;

        const auto mass = detail::label_masses(rng, emitted, peaked, cfg.signal.msp_sufficient);
        if (cfg.signal.reasoning) {
            for (int s = 1; s <= 3; ++s) t.structured.reasoning_steps.push_back({s, "step " + std::to_string(s)});
            const bool r_peaked = u01(rng) < (z == 1 ? 0.5 + 0.25 * cfg.signal.topk : 0.5 - 0.25 * cfg.signal.topk);
            for (std::size_t k = 0; k < 12; ++k) t.tokens.push_back(detail::reasoning_record(rng, r_peaked, k));
        }
        t.tokens.push_back(detail::outcome_record(rng, emitted, mass, !cfg.signal.msp_sufficient));

        // Verbalized confidence: centered at 80, shifted toward z by the signal.
        std::normal_distribution<double> noise(0.0, 12.0);
        const double shift = cfg.signal.verbalized * (z == 1 ? 10.0 : -30.0);
        const int p = snap_confidence(80.0 + shift + noise(rng));
        t.structured.p_correct = p;
        t.structured.band = detail::band_for(p);

        if (label_correctness(row.llm_outcome, row.truth) != z)
            throw Error(ErrorCode::InvalidArgument, "synthetic ground truth inconsistent with correctness");
        out.z.push_back(z);
        out.traces.push_back(std::move(t));
        out.labels.push_back(std::move(row));
    }
    return out;
}

}  // namespace lppgate
