#pragma once

// End-to-end flow: join -> split -> resample train -> grid search ->
// cross-fit -> tau sweep on validation -> frozen-tau test evaluation, with
// the three baselines alongside, plus family ablations.

#include "lppgate/cost_policy.hpp"
#include "lppgate/dataset.hpp"
#include "lppgate/evaluation.hpp"
#include "lppgate/features.hpp"
#include "lppgate/trainer.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <vector>

namespace lppgate {

struct PipelineConfig {
    FamilySet families = FamilySet::all();
    SplitSpec split;
    ResampleConfig resample;
    GridSpace grid;
    CostModel cost;
    SweepConfig sweep;
    std::vector<double> sensitivity_ratios = default_sensitivity_ratios();
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 0;  // grid search workers; 0 = hardware concurrency
};

struct DataSplits {
    LabeledSet train;
    LabeledSet validation;
    LabeledSet test;
    std::vector<std::string> invalid_rows;
    std::vector<std::string> unlabeled_rows;
};

inline LabeledSet select_columns(const LabeledSet& s, const std::vector<std::string>& names) {
    LabeledSet out = s;
    out.columns = names;
    out.X.resize(s.X.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto it = std::find(s.columns.begin(), s.columns.end(), names[j]);
        if (it == s.columns.end()) throw Error(ErrorCode::FeatureMismatch, "missing column " + names[j]);
        out.X.col(static_cast<Eigen::Index>(j)) = s.X.col(static_cast<Eigen::Index>(it - s.columns.begin()));
    }
    return out;
}

inline LabeledSet select_families(const LabeledSet& s, const FamilySet& families) {
    if (families.empty()) throw Error(ErrorCode::InvalidArgument, "empty feature family set");
    std::vector<std::string> names;
    for (const auto& c : s.columns)
        if (families.contains(parse_family(std::string_view(c).substr(0, c.find('.'))))) names.push_back(c);
    return select_columns(s, names);
}

inline LabeledSet subset_by_ids(const LabeledSet& s, const std::vector<std::string>& ids) {
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < s.size(); ++i) pos.emplace(s.item_ids[i], i);
    std::vector<std::size_t> idx;
    for (const auto& id : ids) {
        auto it = pos.find(id);
        if (it == pos.end()) throw Error(ErrorCode::InvalidArgument, "split references unknown item " + id);
        idx.push_back(it->second);
    }
    return s.subset(idx);
}

inline DataSplits make_splits(const FeatureMatrix& m, const std::vector<LabelRow>& labels, const SplitSpec& spec) {
    auto joined = join_labels(m, labels);
    const auto idx = stratified_split(joined.set, spec);
    return DataSplits{joined.set.subset(idx.train), joined.set.subset(idx.validation), joined.set.subset(idx.test),
                      std::move(joined.invalid_rows), std::move(joined.unlabeled_rows)};
}

struct TrainOutcome {
    TrainedGate gate;
    GridResult grid;
    std::vector<std::string> kept_ids;  // training rows after resampling
    std::vector<std::string> warnings;
};

// Resamples the (family-restricted) training split, searches the grid, and
// refits the winning configuration with cross-fit calibration.
inline TrainOutcome train_gate(const LabeledSet& train, const PipelineConfig& cfg) {
    const auto sel = select_families(train, cfg.families);
    auto rcfg = cfg.resample;
    rcfg.seed = cfg.seed;
    const auto rs = resample(sel, rcfg);
    const auto fit_set = sel.subset(rs.keep);

    TrainOutcome out;
    out.warnings = rs.warnings;
    out.kept_ids = fit_set.item_ids;
    out.grid = grid_search(cfg.grid, fit_set.X, fit_set.z, cfg.seed, cfg.threads);
    out.gate = cross_fit_calibrated(fit_set.X, fit_set.z, out.grid.best, fit_set.columns, cfg.seed);
    return out;
}

inline std::vector<double> score_set(const TrainedGate& gate, const LabeledSet& s) {
    return predict_scores_ordered(gate, select_columns(s, gate.feature_names).X);
}

// Meta-model plus every baseline whose column is available, on one split.
inline ComparisonReport evaluate_methods(const TrainedGate& gate, const LabeledSet& validation, const LabeledSet& test,
                                         const CostModel& cost, const SweepConfig& sweep) {
    ComparisonReport r;
    r.cost = cost;
    r.test_size = test.size();
    r.always_trust_cost = always_trust_cost(test.z, cost);
    for (const auto& b : all_baselines())
        if (std::find(validation.columns.begin(), validation.columns.end(), b.column()) != validation.columns.end())
            r.methods.push_back(run_baseline(b, validation, test, cost, sweep));
    const auto vs = score_set(gate, validation);
    const auto ts = score_set(gate, test);
    auto meta = evaluate_scores("Meta-Model", vs, validation.z, ts, test.z, cost, sweep);
    if (gate.tau_star) meta.test = metrics_at(ts, test.z, *gate.tau_star, cost);
    r.methods.push_back(std::move(meta));
    return r;
}

struct PipelineResult {
    DataSplits splits;
    TrainOutcome training;
    PolicyResult policy;  // on validation
    ComparisonReport report;
};

inline PipelineResult run_pipeline_on_splits(DataSplits splits, const PipelineConfig& cfg) {
    PipelineResult r;
    r.training = train_gate(splits.train, cfg);
    const auto vs = score_set(r.training.gate, splits.validation);
    r.policy = sweep_threshold(vs, splits.validation.z, cfg.cost, cfg.sweep);
    r.training.gate.tau_star = r.policy.tau_star;
    r.report = evaluate_methods(r.training.gate, splits.validation, splits.test, cfg.cost, cfg.sweep);
    r.splits = std::move(splits);
    return r;
}

inline PipelineResult run_pipeline(const FeatureMatrix& m, const std::vector<LabelRow>& labels,
                                   const PipelineConfig& cfg) {
    auto spec = cfg.split;
    spec.seed = cfg.seed;
    return run_pipeline_on_splits(make_splits(m, labels, spec), cfg);
}

inline const MethodResult& meta_result(const ComparisonReport& r) { return r.methods.back(); }

// Re-runs training, sweep and test evaluation without one family.
inline std::vector<AblationRow> run_ablation(const DataSplits& splits, const PipelineConfig& cfg,
                                             const std::vector<FeatureFamily>& drops, double full_cost) {
    std::vector<AblationRow> rows;
    for (auto f : drops) {
        if (!cfg.families.contains(f))
            throw Error(ErrorCode::InvalidArgument, "family " + std::string(to_string(f)) + " is not in the full set");
        auto c = cfg;
        c.families = cfg.families.without(f);
        const auto r = run_pipeline_on_splits(splits, c);
        const double cost = meta_result(r.report).test.expected_cost;
        rows.push_back({std::string(to_string(f)), cost, cost - full_cost});
    }
    return rows;
}

}  // namespace lppgate
