#pragma once

// Trust/escalate routing, expected cost relative to always-trust, the
// validation threshold sweep, and cost-ratio sensitivity.
//
// Positive class = Trust. TP: trust a correct answer, FP: trust an error,
// TN: escalate an error, FN: escalate a correct answer.

#include "lppgate/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace lppgate {

struct CostModel {
    double c_mis = 1.0;   // undetected misclassification
    double c_rev = 0.64;  // one human review

    double ratio() const { return c_rev / c_mis; }

    static CostModel from_ratio(double r, double c_mis = 1.0) { return CostModel{c_mis, r * c_mis}; }

    void validate() const {
        if (!(c_mis > 0.0 && c_rev > 0.0)) throw Error(ErrorCode::InvalidArgument, "costs must be positive");
    }
};

enum class Decision : std::uint8_t { Trust, Escalate };

inline Decision route(double score, double tau) { return score >= tau ? Decision::Trust : Decision::Escalate; }

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    std::size_t escalations() const { return tn + fn; }
    double escalation_ratio() const {
        return total() == 0 ? 0.0 : static_cast<double>(escalations()) / static_cast<double>(total());
    }

    bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion(std::span<const Decision> decisions, std::span<const int> z) {
    if (decisions.size() != z.size()) throw Error(ErrorCode::LengthMismatch, "decisions and labels differ in length");
    ConfusionCounts c;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const bool trust = decisions[i] == Decision::Trust;
        if (trust) (z[i] == 1 ? c.tp : c.fp)++;
        else (z[i] == 0 ? c.tn : c.fn)++;
    }
    return c;
}

inline ConfusionCounts confusion_at(std::span<const double> scores, std::span<const int> z, double tau) {
    std::vector<Decision> d;
    d.reserve(scores.size());
    for (double s : scores) d.push_back(route(s, tau));
    return confusion(d, z);
}

inline double expected_cost(const ConfusionCounts& c, const CostModel& m) {
    return m.c_mis * static_cast<double>(c.fp) + (m.c_rev - m.c_mis) * static_cast<double>(c.tn) +
           m.c_rev * static_cast<double>(c.fn);
}

inline double always_trust_cost(std::span<const int> z, const CostModel& m) {
    return m.c_mis * static_cast<double>(std::count(z.begin(), z.end(), 0));
}

struct SweepConfig {
    double tau_lo = 0.35;
    double tau_hi = 0.70;
    double step = 0.005;

    // Grid points snapped to 1e-12 so e.g. 0.40 is the double nearest 0.40.
    std::vector<double> grid() const {
        if (!(step > 0.0) || !(tau_hi >= tau_lo)) throw Error(ErrorCode::InvalidArgument, "bad tau grid");
        const auto n = static_cast<std::size_t>(std::llround((tau_hi - tau_lo) / step)) + 1;
        std::vector<double> g;
        g.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            g.push_back(std::round((tau_lo + static_cast<double>(i) * step) * 1e12) / 1e12);
        return g;
    }
};

struct PolicyResult {
    double tau_star = 0.5;
    double expected_cost = 0.0;
    ConfusionCounts counts;

    std::size_t escalations() const { return counts.escalations(); }
    double escalation_ratio() const { return counts.escalation_ratio(); }
};

// Minimizes expected cost over the grid; ties go to fewer escalations, then lower tau.
inline PolicyResult sweep_threshold(std::span<const double> scores, std::span<const int> z, const CostModel& m,
                                    const SweepConfig& cfg = {}) {
    if (scores.size() != z.size()) throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
    m.validate();
    PolicyResult best;
    bool have = false;
    for (double tau : cfg.grid()) {
        const auto c = confusion_at(scores, z, tau);
        const double cost = expected_cost(c, m);
        const double tie_tol = 1e-12 * (1.0 + std::abs(cost));
        bool better = !have;
        if (have) {
            if (cost < best.expected_cost - tie_tol) better = true;
            else if (std::abs(cost - best.expected_cost) <= tie_tol && c.escalations() < best.counts.escalations())
                better = true;
        }
        if (better) {
            best = PolicyResult{tau, cost, c};
            have = true;
        }
    }
    return best;
}

struct SensitivityPoint {
    double r = 0.0;
    double relative_cost = 0.0;  // C / c_mis
};

inline const std::vector<double>& default_sensitivity_ratios() {
    static const std::vector<double> r{0.4, 0.64, 0.9};
    return r;
}

inline std::vector<SensitivityPoint> cost_ratio_sensitivity(const ConfusionCounts& c, std::span<const double> ratios) {
    std::vector<SensitivityPoint> out;
    for (double r : ratios)
        out.push_back({r, static_cast<double>(c.fp) + (r - 1.0) * static_cast<double>(c.tn) +
                              r * static_cast<double>(c.fn)});
    return out;
}

inline nlohmann::ordered_json to_json(const ConfusionCounts& c) {
    nlohmann::ordered_json j;
    j["tp"] = c.tp;
    j["fp"] = c.fp;
    j["tn"] = c.tn;
    j["fn"] = c.fn;
    return j;
}

inline ConfusionCounts counts_from_json(const nlohmann::ordered_json& j) {
    return ConfusionCounts{j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
                           j.at("tn").get<std::size_t>(), j.at("fn").get<std::size_t>()};
}

// Policy report: tau*, cost, always-trust cost, counts, escalations and the sensitivity curve.
inline nlohmann::ordered_json policy_report(const PolicyResult& p, double always_trust, const CostModel& m,
                                            std::span<const double> ratios) {
    nlohmann::ordered_json j;
    j["tau_star"] = p.tau_star;
    j["expected_cost"] = p.expected_cost;
    j["always_trust_cost"] = always_trust;
    j["c_mis"] = m.c_mis;
    j["c_rev"] = m.c_rev;
    j["counts"] = to_json(p.counts);
    j["escalations"] = p.escalations();
    j["escalation_ratio"] = p.escalation_ratio();
    nlohmann::ordered_json sens = nlohmann::ordered_json::array();
    for (const auto& s : cost_ratio_sensitivity(p.counts, ratios)) {
        nlohmann::ordered_json e;
        e["r"] = s.r;
        e["relative_cost"] = s.relative_cost;
        sens.push_back(std::move(e));
    }
    j["sensitivity"] = std::move(sens);
    return j;
}

}  // namespace lppgate
