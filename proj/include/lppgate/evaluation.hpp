#pragma once

// Predictive and cost metrics, the single-feature baselines, and the
// comparison tables (predictive, cost, ablation).

#include "lppgate/common.hpp"
#include "lppgate/cost_policy.hpp"
#include "lppgate/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lppgate {

struct MetricsReport {
    std::optional<double> f1_trust_class;  // absent when undefined
    std::optional<double> f1_error_class;
    std::optional<double> macro_f1;
    std::optional<double> auc_roc;
    double expected_cost = 0.0;
    std::size_t escalations = 0;
    double escalation_ratio = 0.0;
    ConfusionCounts counts;
};

namespace detail {

inline std::optional<double> f1(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t class_size) {
    if (class_size == 0) return std::nullopt;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

}  // namespace detail

// Mann-Whitney AUC with half credit for ties; positives are z = 1.
inline std::optional<double> auc_roc(std::span<const double> scores, std::span<const int> z) {
    if (scores.size() != z.size()) throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t k = 0; k < order.size();) {
        std::size_t e = k;
        while (e < order.size() && scores[order[e]] == scores[order[k]]) ++e;
        const double mid_rank = 0.5 * static_cast<double>(k + 1 + e);  // average of ranks k+1..e
        for (std::size_t t = k; t < e; ++t)
            if (z[order[t]] == 1) {
                rank_sum_pos += mid_rank;
                ++n_pos;
            }
        k = e;
    }
    const std::size_t n_neg = z.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    const double np = static_cast<double>(n_pos);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

inline MetricsReport compute_metrics(std::span<const double> scores, std::span<const Decision> decisions,
                                     std::span<const int> z, const CostModel& m) {
    if (scores.size() != z.size()) throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
    MetricsReport r;
    r.counts = confusion(decisions, z);
    const auto& c = r.counts;
    r.f1_trust_class = detail::f1(c.tp, c.fp, c.fn, c.tp + c.fn);
    r.f1_error_class = detail::f1(c.tn, c.fn, c.fp, c.tn + c.fp);
    if (r.f1_trust_class && r.f1_error_class) r.macro_f1 = 0.5 * (*r.f1_trust_class + *r.f1_error_class);
    r.auc_roc = auc_roc(scores, z);
    r.expected_cost = expected_cost(c, m);
    r.escalations = c.escalations();
    r.escalation_ratio = c.escalation_ratio();
    return r;
}

inline MetricsReport metrics_at(std::span<const double> scores, std::span<const int> z, double tau,
                                const CostModel& m) {
    std::vector<Decision> d;
    d.reserve(scores.size());
    for (double s : scores) d.push_back(route(s, tau));
    return compute_metrics(scores, d, z, m);
}

// ---------------------------------------------------------------------------
// Baselines

enum class BaselineFeature : std::uint8_t { MSP, Top2Margin, Entropy };
enum class Orientation : std::uint8_t { HigherIsCorrect, LowerIsCorrect };

struct BaselineSpec {
    BaselineFeature feature = BaselineFeature::MSP;

    Orientation orientation() const {
        return feature == BaselineFeature::Entropy ? Orientation::LowerIsCorrect : Orientation::HigherIsCorrect;
    }
    std::string column() const {
        switch (feature) {
            case BaselineFeature::MSP: return "outcome_topk.msp";
            case BaselineFeature::Top2Margin: return "outcome_topk.top2_margin";
            case BaselineFeature::Entropy: return "outcome_topk.entropy";
        }
        return {};
    }
    std::string display_name() const {
        switch (feature) {
            case BaselineFeature::MSP: return "MSP";
            case BaselineFeature::Top2Margin: return "Top-2 Margin";
            case BaselineFeature::Entropy: return "Entropy";
        }
        return {};
    }
};

inline const std::vector<BaselineSpec>& all_baselines() {
    static const std::vector<BaselineSpec> b{{BaselineFeature::MSP}, {BaselineFeature::Top2Margin},
                                             {BaselineFeature::Entropy}};
    return b;
}

// Min-max map fitted on validation; constant validation range maps to 0.5.
struct MinMaxRescaler {
    double lo = 0.0;
    double hi = 1.0;

    double operator()(double v) const {
        if (!(hi > lo)) return 0.5;
        return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    }
};

inline MinMaxRescaler fit_minmax(std::span<const double> v) {
    if (v.empty()) throw Error(ErrorCode::InvalidArgument, "cannot rescale an empty vector");
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return MinMaxRescaler{*lo, *hi};
}

inline std::vector<double> oriented_feature(const LabeledSet& s, const BaselineSpec& spec) {
    const auto name = spec.column();
    const auto it = std::find(s.columns.begin(), s.columns.end(), name);
    if (it == s.columns.end()) throw Error(ErrorCode::MissingFeature, "baseline needs column " + name);
    const auto j = static_cast<Eigen::Index>(it - s.columns.begin());
    std::vector<double> v(s.size());
    const double sign = spec.orientation() == Orientation::LowerIsCorrect ? -1.0 : 1.0;
    for (std::size_t i = 0; i < s.size(); ++i) v[i] = sign * s.X(static_cast<Eigen::Index>(i), j);
    return v;
}

struct MethodResult {
    std::string method;
    PolicyResult validation_policy;  // tau* chosen on validation
    MetricsReport test;              // frozen tau* applied to test
};

// Same sweep as the meta-model, on validation-fitted min-max scores.
inline MethodResult run_baseline(const BaselineSpec& spec, const LabeledSet& validation, const LabeledSet& test,
                                 const CostModel& m, const SweepConfig& sweep = {}) {
    const auto val_raw = oriented_feature(validation, spec);
    const auto test_raw = oriented_feature(test, spec);
    const auto rescale = fit_minmax(val_raw);
    std::vector<double> val_s, test_s;
    for (double v : val_raw) val_s.push_back(rescale(v));
    for (double v : test_raw) test_s.push_back(rescale(v));
    MethodResult r;
    r.method = spec.display_name();
    r.validation_policy = sweep_threshold(val_s, validation.z, m, sweep);
    r.test = metrics_at(test_s, test.z, r.validation_policy.tau_star, m);
    return r;
}

inline MethodResult evaluate_scores(std::string method, std::span<const double> val_scores,
                                    std::span<const int> val_z, std::span<const double> test_scores,
                                    std::span<const int> test_z, const CostModel& m, const SweepConfig& sweep = {}) {
    MethodResult r;
    r.method = std::move(method);
    r.validation_policy = sweep_threshold(val_scores, val_z, m, sweep);
    r.test = metrics_at(test_scores, test_z, r.validation_policy.tau_star, m);
    return r;
}

// ---------------------------------------------------------------------------
// Reports

struct AblationRow {
    std::string dropped_family;
    double expected_cost = 0.0;
    double delta_vs_full = 0.0;
};

struct ComparisonReport {
    std::vector<MethodResult> methods;  // MSP, Top-2 Margin, Entropy, Meta-Model
    double always_trust_cost = 0.0;
    std::size_t test_size = 0;
    CostModel cost;
};

namespace detail {

inline std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

inline std::string predictive_csv(const ComparisonReport& r) {
    std::string out = "method,f1_trust_class,f1_error_class,macro_f1,auc_roc\n";
    for (const auto& m : r.methods)
        out += m.method + "," + detail::opt_cell(m.test.f1_trust_class) + "," + detail::opt_cell(m.test.f1_error_class) +
               "," + detail::opt_cell(m.test.macro_f1) + "," + detail::opt_cell(m.test.auc_roc) + "\n";
    return out;
}

inline std::string cost_csv(const ComparisonReport& r) {
    std::string out = "method,tau_star,expected_cost,escalations,escalation_ratio\n";
    for (const auto& m : r.methods)
        out += m.method + "," + format_double(m.validation_policy.tau_star) + "," + format_double(m.test.expected_cost) +
               "," + std::to_string(m.test.escalations) + "," + format_double(m.test.escalation_ratio) + "\n";
    out += "Always-Trust,NA," + format_double(r.always_trust_cost) + ",0,0\n";
    return out;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "dropped_family,expected_cost,delta_vs_full\n";
    for (const auto& a : rows)
        out += a.dropped_family + "," + format_double(a.expected_cost) + "," + format_double(a.delta_vs_full) + "\n";
    return out;
}

inline nlohmann::ordered_json to_json(const MetricsReport& m) {
    nlohmann::ordered_json j;
    j["f1_trust_class"] = detail::opt_json(m.f1_trust_class);
    j["f1_error_class"] = detail::opt_json(m.f1_error_class);
    j["macro_f1"] = detail::opt_json(m.macro_f1);
    j["auc_roc"] = detail::opt_json(m.auc_roc);
    j["expected_cost"] = m.expected_cost;
    j["escalations"] = m.escalations;
    j["escalation_ratio"] = m.escalation_ratio;
    j["counts"] = to_json(m.counts);
    return j;
}

inline nlohmann::ordered_json to_json(const ComparisonReport& r) {
    if (r.methods.empty()) throw Error(ErrorCode::InvalidArgument, "report needs at least one method");
    nlohmann::ordered_json j;
    j["c_mis"] = r.cost.c_mis;
    j["c_rev"] = r.cost.c_rev;
    j["test_size"] = r.test_size;
    j["always_trust_cost"] = r.always_trust_cost;
    nlohmann::ordered_json methods = nlohmann::ordered_json::array();
    for (const auto& m : r.methods) {
        nlohmann::ordered_json e;
        e["method"] = m.method;
        e["tau_star"] = m.validation_policy.tau_star;
        e["validation_cost"] = m.validation_policy.expected_cost;
        e["test"] = to_json(m.test);
        methods.push_back(std::move(e));
    }
    j["methods"] = std::move(methods);
    return j;
}

}  // namespace lppgate
