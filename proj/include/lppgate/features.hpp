#pragma once

// LLM Performance Predictor features, families A-G, plus the feature-matrix
// CSV and its family sidecar.

#include "lppgate/common.hpp"
#include "lppgate/schema.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lppgate {

enum class FeatureFamily : std::uint8_t {
    OutcomeTopK = 0,
    FilteredOutcome,
    LogOddsMargin,
    SequenceCoT,
    TokenLevelCoT,
    Verbalized,
    Attribution,
};

inline constexpr std::size_t kFamilyCount = 7;

inline constexpr std::array<FeatureFamily, kFamilyCount> kAllFamilies{
    FeatureFamily::OutcomeTopK,  FeatureFamily::FilteredOutcome, FeatureFamily::LogOddsMargin,
    FeatureFamily::SequenceCoT,  FeatureFamily::TokenLevelCoT,   FeatureFamily::Verbalized,
    FeatureFamily::Attribution};

inline constexpr std::array<std::string_view, kFamilyCount> kFamilyNames{
    "outcome_topk", "filtered_outcome", "logodds_margin", "sequence_cot",
    "token_level_cot", "verbalized", "attribution"};

inline std::string_view to_string(FeatureFamily f) { return kFamilyNames[static_cast<std::size_t>(f)]; }

inline FeatureFamily parse_family(std::string_view s) {
    s = trim(s);
    for (std::size_t i = 0; i < kFamilyCount; ++i)
        if (s == kFamilyNames[i]) return kAllFamilies[i];
    throw Error(ErrorCode::InvalidArgument, "unknown feature family '" + std::string(s) + "'");
}

class FamilySet {
public:
    FamilySet() = default;
    FamilySet(std::initializer_list<FeatureFamily> fs) {
        for (auto f : fs) insert(f);
    }

    static FamilySet all() {
        FamilySet s;
        for (auto f : kAllFamilies) s.insert(f);
        return s;
    }

    // Comma separated family names; "all" selects every family.
    static FamilySet parse(std::string_view list) {
        if (trim(list) == "all") return all();
        FamilySet s;
        for (const auto& tok : split_csv_row(list))
            if (!tok.empty()) s.insert(parse_family(tok));
        return s;
    }

    void insert(FeatureFamily f) { bits_ |= bit(f); }
    void erase(FeatureFamily f) { bits_ &= ~bit(f); }
    bool contains(FeatureFamily f) const { return (bits_ & bit(f)) != 0; }
    bool empty() const { return bits_ == 0; }

    FamilySet without(FeatureFamily f) const {
        FamilySet s = *this;
        s.erase(f);
        return s;
    }

    std::vector<FeatureFamily> members() const {
        std::vector<FeatureFamily> out;
        for (auto f : kAllFamilies)
            if (contains(f)) out.push_back(f);
        return out;
    }

    std::string to_string() const {
        std::string out;
        for (auto f : members()) {
            if (!out.empty()) out += ',';
            out += lppgate::to_string(f);
        }
        return out;
    }

    bool operator==(const FamilySet&) const = default;

private:
    static unsigned bit(FeatureFamily f) { return 1u << static_cast<unsigned>(f); }
    unsigned bits_ = 0;
};

struct FeatureEntry {
    std::string name;
    FeatureFamily family;
    double value = 0.0;

    std::string qualified_name() const { return std::string(to_string(family)) + "." + name; }
};

struct FeatureVector {
    std::string item_id;
    std::vector<FeatureEntry> entries;
    bool valid = true;
    std::string invalid_reason;

    std::optional<double> get(std::string_view qualified) const {
        for (const auto& e : entries)
            if (e.qualified_name() == qualified) return e.value;
        return std::nullopt;
    }
};

struct FeatureConfig {
    std::size_t top_k = 5;
    bool binary_support = false;  // 𝒜 = {0,1} instead of {0,1,2,3}
};

// ---------------------------------------------------------------------------
// Family A: renormalized top-k outcome distribution

struct TopKDistribution {
    std::vector<double> probs;  // descending

    std::size_t k() const { return probs.size(); }
};

inline TopKDistribution renormalize_topk(std::span<const double> logprobs) {
    if (logprobs.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidate logprobs");
    const double mx = *std::max_element(logprobs.begin(), logprobs.end());
    if (!std::isfinite(mx)) throw Error(ErrorCode::InvalidArgument, "top logprob is not finite");
    TopKDistribution d;
    d.probs.reserve(logprobs.size());
    double total = 0.0;
    for (double l : logprobs) {
        const double e = std::exp(l - mx);
        d.probs.push_back(e);
        total += e;
    }
    for (double& p : d.probs) p /= total;
    std::stable_sort(d.probs.begin(), d.probs.end(), std::greater<>());
    return d;
}

// The eight uncertainty summaries shared by families A and B.
struct DistributionStats {
    double entropy = 0.0;  // bits
    double normalized_entropy = 0.0;
    double effective_choices = 1.0;
    double confidence = 1.0;
    double msp = 0.0;
    double top2_margin = 0.0;
    double top2_margin_normalized = 0.0;
    double top1_top2_ratio = 0.0;
};

// probs must be descending; k sets the entropy normalizer log2(k).
inline DistributionStats distribution_stats(std::span<const double> probs, std::size_t k) {
    DistributionStats s;
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log2(p);
    s.entropy = std::max(h, 0.0);
    s.normalized_entropy = k > 1 ? s.entropy / std::log2(static_cast<double>(k)) : 0.0;
    s.effective_choices = std::exp2(s.entropy);
    s.confidence = 1.0 - s.normalized_entropy;
    const double p1 = probs.empty() ? 0.0 : probs[0];
    const double p2 = probs.size() > 1 ? probs[1] : 0.0;
    s.msp = p1;
    s.top2_margin = p1 - p2;
    s.top2_margin_normalized = (p1 - p2) / std::max(p1, kEpsilon);
    s.top1_top2_ratio = p1 / std::max(p2, kEpsilon);
    return s;
}

inline DistributionStats compute_topk_features(const TopKDistribution& dist) {
    return distribution_stats(dist.probs, dist.k());
}

// ---------------------------------------------------------------------------
// Family B: mass collapsed onto schema labels

struct LabelDistribution {
    std::vector<OutcomeLabel> support;
    std::array<double, 4> mass{};   // un-normalized exp(logprob) totals
    std::array<double, 4> probs{};  // renormalized over the support

    // Probabilities over the support, descending.
    std::vector<double> sorted_probs() const {
        std::vector<double> v;
        for (auto l : support) v.push_back(probs[static_cast<std::size_t>(l)]);
        std::stable_sort(v.begin(), v.end(), std::greater<>());
        return v;
    }
};

inline std::vector<OutcomeLabel> label_support(bool binary) {
    if (binary) return {OutcomeLabel::No, OutcomeLabel::Yes};
    return {kAllLabels.begin(), kAllLabels.end()};
}

inline LabelDistribution collapse_to_labels(std::span<const TokenCandidate> candidates,
                                            std::span<const OutcomeLabel> support) {
    LabelDistribution d;
    d.support.assign(support.begin(), support.end());
    auto in_support = [&](OutcomeLabel l) {
        return std::find(support.begin(), support.end(), l) != support.end();
    };
    double total = 0.0;
    for (const auto& c : candidates) {
        auto l = normalize_outcome_token(c.surface);
        if (!l || !in_support(*l)) continue;
        const double m = std::exp(c.logprob);
        d.mass[static_cast<std::size_t>(*l)] += m;
        total += m;
    }
    if (!(total > 0.0)) throw Error(ErrorCode::NoLabelMass, "no candidate maps to a schema label");
    for (auto l : support) d.probs[static_cast<std::size_t>(l)] = d.mass[static_cast<std::size_t>(l)] / total;
    return d;
}

inline DistributionStats compute_filtered_features(const LabelDistribution& ld) {
    const auto p = ld.sorted_probs();
    return distribution_stats(p, ld.support.size());
}

// ---------------------------------------------------------------------------
// Family C: log-space margins

struct LogOddsFeatures {
    double margin = 0.0;
    double margin_normalized = 0.0;
    bool valid = false;
    double filtered_margin = 0.0;
    double filtered_margin_normalized = 0.0;
    bool filtered_valid = false;
};

namespace detail {

inline std::pair<double, double> log_margin(double top, double second) {
    const double diff = second - top;
    const double denom = std::min(second, -kEpsilon);
    double norm = diff / denom;
    if (norm == 0.0) norm = 0.0;  // no -0
    return {diff == 0.0 ? 0.0 : diff, norm};
}

}  // namespace detail

// candidates must be sorted by descending logprob.
inline LogOddsFeatures compute_logodds_features(std::span<const TokenCandidate> candidates,
                                                const std::optional<LabelDistribution>& filtered) {
    LogOddsFeatures f;
    if (candidates.size() >= 2) {
        std::tie(f.margin, f.margin_normalized) =
            detail::log_margin(candidates[0].logprob, candidates[1].logprob);
        f.valid = true;
    }
    if (filtered) {
        std::vector<double> lm;
        for (auto l : filtered->support) {
            const double m = filtered->mass[static_cast<std::size_t>(l)];
            if (m > 0.0) lm.push_back(std::log(m));
        }
        std::sort(lm.begin(), lm.end(), std::greater<>());
        if (lm.size() >= 2) {
            std::tie(f.filtered_margin, f.filtered_margin_normalized) = detail::log_margin(lm[0], lm[1]);
            f.filtered_valid = true;
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Families D-E: reasoning-span statistics

struct SequenceStats {
    double nll = 0.0;  // nats
    double perplexity = 1.0;
    double mean_token_entropy_bits = 0.0;
    std::array<double, 5> entropy_quantiles{};
    std::array<double, 5> prob_quantiles{};
    bool present = false;
};

inline constexpr std::array<double, 5> kQuantileLevels{0.0, 0.25, 0.5, 0.75, 1.0};

// Linear interpolation between closest ranks.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline std::array<double, 5> quantiles(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::array<double, 5> out{};
    for (std::size_t i = 0; i < kQuantileLevels.size(); ++i) out[i] = quantile_sorted(values, kQuantileLevels[i]);
    return out;
}

inline double token_entropy_bits(const TokenRecord& rec, std::size_t top_k) {
    std::vector<double> lps;
    for (std::size_t i = 0; i < rec.candidates.size() && i < top_k; ++i) lps.push_back(rec.candidates[i].logprob);
    if (lps.empty()) lps.push_back(rec.chosen.logprob);
    return compute_topk_features(renormalize_topk(lps)).entropy;
}

inline SequenceStats compute_sequence_features(std::span<const TokenRecord> reasoning, std::size_t top_k = 5) {
    SequenceStats s;
    if (reasoning.empty()) return s;
    s.present = true;
    std::vector<double> ent, prob;
    double sum_lp = 0.0;
    for (const auto& r : reasoning) {
        sum_lp += r.chosen.logprob;
        prob.push_back(std::exp(r.chosen.logprob));
        ent.push_back(token_entropy_bits(r, top_k));
    }
    const double t = static_cast<double>(reasoning.size());
    s.nll = -sum_lp;
    s.perplexity = std::exp(s.nll / t);
    s.mean_token_entropy_bits = std::accumulate(ent.begin(), ent.end(), 0.0) / t;
    s.entropy_quantiles = quantiles(std::move(ent));
    s.prob_quantiles = quantiles(std::move(prob));
    return s;
}

// ---------------------------------------------------------------------------
// Families F-G: black-box features from the structured output

struct VerbalizedFeatures {
    double confidence = 0.5;
    bool confidence_missing = true;
    std::array<double, 5> band_one_hot{};
};

inline VerbalizedFeatures compute_verbalized_features(const StructuredResponse& s) {
    VerbalizedFeatures v;
    if (s.p_correct) {
        v.confidence = static_cast<double>(*s.p_correct) / 100.0;
        v.confidence_missing = false;
    }
    if (s.band) v.band_one_hot[static_cast<std::size_t>(*s.band)] = 1.0;
    return v;
}

struct AttributionFeatures {
    double evidence_deficit = 0.0;
    double policy_gap = 0.0;
    double inconclusive = 0.0;
};

inline AttributionFeatures compute_attribution_features(OutcomeLabel outcome) {
    AttributionFeatures a;
    a.evidence_deficit = outcome == OutcomeLabel::InconclusiveEvidence ? 1.0 : 0.0;
    a.policy_gap = outcome == OutcomeLabel::InconclusiveDefinition ? 1.0 : 0.0;
    a.inconclusive = is_abstention(outcome) ? 1.0 : 0.0;
    return a;
}

// ---------------------------------------------------------------------------
// Catalog and assembly

namespace detail {

inline const std::vector<std::string>& family_columns(FeatureFamily f) {
    static const std::array<std::vector<std::string>, kFamilyCount> names{{
        {"entropy", "normalized_entropy", "effective_choices", "confidence", "msp", "top2_margin",
         "top2_margin_normalized", "top1_top2_ratio"},
        {"entropy", "normalized_entropy", "effective_choices", "confidence", "top2_margin",
         "top2_margin_normalized", "top1_top2_ratio"},
        {"margin", "margin_normalized", "margin_valid", "filtered_margin", "filtered_margin_normalized",
         "filtered_margin_valid"},
        {"nll", "perplexity", "reasoning_present"},
        {"mean_entropy", "entropy_q0", "entropy_q25", "entropy_q50", "entropy_q75", "entropy_q100", "prob_q0",
         "prob_q25", "prob_q50", "prob_q75", "prob_q100"},
        {"p_correct", "p_correct_missing", "band_vl", "band_l", "band_m", "band_h", "band_vh"},
        {"evidence_deficit", "policy_gap", "inconclusive"},
    }};
    return names[static_cast<std::size_t>(f)];
}

}  // namespace detail

inline std::vector<std::string> feature_names(FeatureFamily f) {
    std::vector<std::string> out;
    for (const auto& n : detail::family_columns(f)) out.push_back(std::string(to_string(f)) + "." + n);
    return out;
}

inline std::vector<std::string> feature_names(const FamilySet& include) {
    std::vector<std::string> out;
    for (auto f : include.members())
        for (auto& n : feature_names(f)) out.push_back(std::move(n));
    return out;
}

inline FeatureVector assemble_feature_vector(const ResponseTrace& trace, const FamilySet& include,
                                             const FeatureConfig& cfg = {}) {
    if (include.empty()) throw Error(ErrorCode::InvalidArgument, "empty feature family set");
    FeatureVector fv;
    fv.item_id = trace.item_id;

    const TokenRecord* outcome_tok = trace.logprobs_available ? trace.outcome_token() : nullptr;
    if (!outcome_tok) {
        fv.valid = false;
        fv.invalid_reason = trace.logprobs_available ? "no outcome token" : "gray-box unavailable";
    }

    std::optional<DistributionStats> topk;
    std::optional<LabelDistribution> labels;
    if (outcome_tok) {
        std::vector<double> lps;
        for (std::size_t i = 0; i < outcome_tok->candidates.size() && i < cfg.top_k; ++i)
            lps.push_back(outcome_tok->candidates[i].logprob);
        if (lps.empty()) lps.push_back(outcome_tok->chosen.logprob);
        topk = compute_topk_features(renormalize_topk(lps));
        try {
            const auto support = label_support(cfg.binary_support);
            labels = collapse_to_labels(outcome_tok->candidates, support);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoLabelMass) throw;
            fv.valid = false;
            fv.invalid_reason = "no label mass";
        }
    }

    auto push = [&](FeatureFamily fam, std::initializer_list<double> values) {
        const auto& names = detail::family_columns(fam);
        std::size_t i = 0;
        for (double v : values) fv.entries.push_back({names[i++], fam, v});
    };

    for (auto fam : include.members()) {
        switch (fam) {
            case FeatureFamily::OutcomeTopK: {
                const auto s = topk.value_or(DistributionStats{});
                push(fam, {s.entropy, s.normalized_entropy, s.effective_choices, s.confidence, s.msp,
                           s.top2_margin, s.top2_margin_normalized, s.top1_top2_ratio});
                break;
            }
            case FeatureFamily::FilteredOutcome: {
                const auto s = labels ? compute_filtered_features(*labels) : DistributionStats{};
                push(fam, {s.entropy, s.normalized_entropy, s.effective_choices, s.confidence, s.top2_margin,
                           s.top2_margin_normalized, s.top1_top2_ratio});
                break;
            }
            case FeatureFamily::LogOddsMargin: {
                LogOddsFeatures lo;
                if (outcome_tok) lo = compute_logodds_features(outcome_tok->candidates, labels);
                push(fam, {lo.margin, lo.margin_normalized, lo.valid ? 1.0 : 0.0, lo.filtered_margin,
                           lo.filtered_margin_normalized, lo.filtered_valid ? 1.0 : 0.0});
                break;
            }
            case FeatureFamily::SequenceCoT:
            case FeatureFamily::TokenLevelCoT: {
                std::vector<TokenRecord> reasoning;
                for (const auto& t : trace.tokens)
                    if (t.span == Span::Reasoning) reasoning.push_back(t);
                const auto s = compute_sequence_features(reasoning, cfg.top_k);
                if (fam == FeatureFamily::SequenceCoT) {
                    push(fam, {s.nll, s.perplexity, s.present ? 1.0 : 0.0});
                } else {
                    const auto& e = s.entropy_quantiles;
                    const auto& p = s.prob_quantiles;
                    push(fam, {s.mean_token_entropy_bits, e[0], e[1], e[2], e[3], e[4], p[0], p[1], p[2], p[3],
                               p[4]});
                }
                break;
            }
            case FeatureFamily::Verbalized: {
                const auto v = compute_verbalized_features(trace.structured);
                const auto& b = v.band_one_hot;
                push(fam, {v.confidence, v.confidence_missing ? 1.0 : 0.0, b[0], b[1], b[2], b[3], b[4]});
                break;
            }
            case FeatureFamily::Attribution: {
                // The emitted outcome token wins over the structured field.
                OutcomeLabel outcome = trace.structured.outcome;
                if (outcome_tok)
                    if (auto l = normalize_outcome_token(outcome_tok->chosen.surface)) outcome = *l;
                const auto a = compute_attribution_features(outcome);
                push(fam, {a.evidence_deficit, a.policy_gap, a.inconclusive});
                break;
            }
        }
    }
    for (const auto& e : fv.entries)
        if (!std::isfinite(e.value))
            throw Error(ErrorCode::InvalidArgument, "non-finite feature " + e.qualified_name() + " for " + trace.item_id);
    return fv;
}

// ---------------------------------------------------------------------------
// Feature matrix: CSV with `item_id,valid,<family.name>...` plus a JSON sidecar

struct FeatureMatrix {
    std::vector<std::string> item_ids;
    std::vector<std::string> columns;  // qualified names
    std::vector<bool> valid;
    Eigen::MatrixXd values;  // rows = items

    std::size_t rows() const { return item_ids.size(); }

    std::optional<std::size_t> column_index(std::string_view name) const {
        for (std::size_t j = 0; j < columns.size(); ++j)
            if (columns[j] == name) return j;
        return std::nullopt;
    }

    std::optional<std::size_t> row_index(std::string_view id) const {
        for (std::size_t i = 0; i < item_ids.size(); ++i)
            if (item_ids[i] == id) return i;
        return std::nullopt;
    }

    FamilySet families() const {
        FamilySet s;
        for (const auto& c : columns) s.insert(parse_family(std::string_view(c).substr(0, c.find('.'))));
        return s;
    }

    // Columns restricted to the given families, order preserved.
    FeatureMatrix select_families(const FamilySet& include) const {
        std::vector<std::size_t> keep;
        for (std::size_t j = 0; j < columns.size(); ++j)
            if (include.contains(parse_family(std::string_view(columns[j]).substr(0, columns[j].find('.')))))
                keep.push_back(j);
        FeatureMatrix out;
        out.item_ids = item_ids;
        out.valid = valid;
        out.values.resize(values.rows(), static_cast<Eigen::Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) {
            out.columns.push_back(columns[keep[k]]);
            out.values.col(static_cast<Eigen::Index>(k)) = values.col(static_cast<Eigen::Index>(keep[k]));
        }
        return out;
    }
};

inline FeatureMatrix build_feature_matrix(const std::vector<ResponseTrace>& traces, const FamilySet& include,
                                          const FeatureConfig& cfg = {}) {
    std::vector<const ResponseTrace*> order;
    for (const auto& t : traces) order.push_back(&t);
    std::stable_sort(order.begin(), order.end(),
                     [](const ResponseTrace* a, const ResponseTrace* b) { return a->item_id < b->item_id; });
    for (std::size_t i = 1; i < order.size(); ++i)
        if (order[i]->item_id == order[i - 1]->item_id)
            throw Error(ErrorCode::InvalidArgument, "duplicate item_id " + order[i]->item_id);

    FeatureMatrix m;
    m.columns = feature_names(include);
    m.values.resize(static_cast<Eigen::Index>(order.size()), static_cast<Eigen::Index>(m.columns.size()));
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto fv = assemble_feature_vector(*order[i], include, cfg);
        m.item_ids.push_back(fv.item_id);
        m.valid.push_back(fv.valid);
        for (std::size_t j = 0; j < fv.entries.size(); ++j)
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fv.entries[j].value;
    }
    return m;
}

inline std::string to_csv(const FeatureMatrix& m) {
    std::string out = "item_id,valid";
    for (const auto& c : m.columns) out += "," + c;
    out += '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out += m.item_ids[i];
        out += m.valid[i] ? ",1" : ",0";
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
            out += ',';
            out += format_double(m.values(static_cast<Eigen::Index>(i), j));
        }
        out += '\n';
    }
    return out;
}

inline FeatureMatrix feature_matrix_from_csv(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw Error(ErrorCode::InvalidArgument, "empty feature CSV");
    const auto header = split_csv_row(lines[0]);
    if (header.size() < 2 || header[0] != "item_id" || header[1] != "valid")
        throw Error(ErrorCode::InvalidArgument, "feature CSV header must start with item_id,valid");
    FeatureMatrix m;
    m.columns.assign(header.begin() + 2, header.end());
    for (const auto& c : m.columns) (void)parse_family(std::string_view(c).substr(0, c.find('.')));
    m.values.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(m.columns.size()));
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto row = split_csv_row(lines[i]);
        if (row.size() != header.size())
            throw Error(ErrorCode::InvalidArgument, "feature CSV row " + std::to_string(i) + " has wrong width");
        m.item_ids.push_back(row[0]);
        m.valid.push_back(row[1] == "1");
        for (std::size_t j = 2; j < row.size(); ++j)
            m.values(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 2)) = parse_double(row[j]);
    }
    return m;
}

inline nlohmann::ordered_json family_sidecar(const FeatureMatrix& m, const FeatureConfig& cfg = {}) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json fams = nlohmann::ordered_json::array();
    for (auto f : m.families().members()) {
        nlohmann::ordered_json e;
        e["family"] = std::string(to_string(f));
        nlohmann::ordered_json cols = nlohmann::ordered_json::array();
        for (const auto& c : m.columns)
            if (c.rfind(std::string(to_string(f)) + ".", 0) == 0) cols.push_back(c);
        e["columns"] = std::move(cols);
        fams.push_back(std::move(e));
    }
    j["families"] = std::move(fams);
    j["top_k"] = cfg.top_k;
    nlohmann::ordered_json sup = nlohmann::ordered_json::array();
    for (auto l : label_support(cfg.binary_support)) sup.push_back(to_int(l));
    j["label_support"] = std::move(sup);
    return j;
}

}  // namespace lppgate
