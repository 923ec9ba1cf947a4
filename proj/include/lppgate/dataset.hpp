#pragma once

// Correctness labeling, Tomek-link cleaning, protected random undersampling
// and the fixed-negative stratified split. Every sampling step runs over rows
// ordered by item_id so results do not depend on input row order.

#include "lppgate/common.hpp"
#include "lppgate/features.hpp"
#include "lppgate/schema.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace lppgate {

enum class GroundTruth : std::uint8_t { NonViolating = 0, Violating = 1 };

// z = 1 iff the LLM answer matches the ground truth; abstentions never match.
inline int label_correctness(OutcomeLabel llm_outcome, GroundTruth truth) {
    if (llm_outcome == OutcomeLabel::Yes && truth == GroundTruth::Violating) return 1;
    if (llm_outcome == OutcomeLabel::No && truth == GroundTruth::NonViolating) return 1;
    return 0;
}

struct LabelRow {
    std::string item_id;
    GroundTruth truth = GroundTruth::NonViolating;
    OutcomeLabel llm_outcome = OutcomeLabel::No;
};

inline std::string labels_to_csv(const std::vector<LabelRow>& rows) {
    std::string out = "item_id,ground_truth,llm_outcome\n";
    for (const auto& r : rows)
        out += r.item_id + "," + std::to_string(static_cast<int>(r.truth)) + "," +
               std::to_string(to_int(r.llm_outcome)) + "\n";
    return out;
}

inline std::vector<LabelRow> labels_from_csv(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty() || split_csv_row(lines[0]) != std::vector<std::string>{"item_id", "ground_truth", "llm_outcome"})
        throw Error(ErrorCode::InvalidArgument, "labels CSV header must be item_id,ground_truth,llm_outcome");
    std::vector<LabelRow> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto row = split_csv_row(lines[i]);
        if (row.size() != 3) throw Error(ErrorCode::InvalidArgument, "labels CSV row " + std::to_string(i));
        LabelRow r;
        r.item_id = row[0];
        if (row[1] == "1" || row[1] == "violating") r.truth = GroundTruth::Violating;
        else if (row[1] == "0" || row[1] == "non-violating") r.truth = GroundTruth::NonViolating;
        else throw Error(ErrorCode::InvalidArgument, "bad ground_truth '" + row[1] + "'");
        auto l = normalize_outcome_token(row[2]);
        if (!l) throw Error(ErrorCode::InvalidArgument, "bad llm_outcome '" + row[2] + "'");
        r.llm_outcome = *l;
        out.push_back(std::move(r));
    }
    return out;
}

// Feature rows joined with labels and correctness indicators.
struct LabeledSet {
    std::vector<std::string> item_ids;
    std::vector<std::string> columns;
    Eigen::MatrixXd X;
    std::vector<int> z;
    std::vector<OutcomeLabel> outcomes;

    std::size_t size() const { return item_ids.size(); }

    std::size_t count(int cls) const { return static_cast<std::size_t>(std::count(z.begin(), z.end(), cls)); }

    LabeledSet subset(const std::vector<std::size_t>& idx) const {
        LabeledSet s;
        s.columns = columns;
        s.X.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            s.item_ids.push_back(item_ids[idx[k]]);
            s.X.row(static_cast<Eigen::Index>(k)) = X.row(static_cast<Eigen::Index>(idx[k]));
            s.z.push_back(z[idx[k]]);
            s.outcomes.push_back(outcomes[idx[k]]);
        }
        return s;
    }

    // Row indices ordered by item_id.
    std::vector<std::size_t> canonical_order() const {
        std::vector<std::size_t> order(size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return item_ids[a] < item_ids[b]; });
        return order;
    }
};

struct JoinResult {
    LabeledSet set;
    std::vector<std::string> invalid_rows;    // feature rows flagged invalid
    std::vector<std::string> unlabeled_rows;  // feature rows without a label
};

// Joins valid feature rows with labels, ordered by item_id.
inline JoinResult join_labels(const FeatureMatrix& m, const std::vector<LabelRow>& labels) {
    std::map<std::string, const LabelRow*> by_id;
    for (const auto& l : labels)
        if (!by_id.emplace(l.item_id, &l).second)
            throw Error(ErrorCode::InvalidArgument, "duplicate label for " + l.item_id);

    JoinResult r;
    r.set.columns = m.columns;
    std::vector<std::size_t> rows;
    std::vector<std::size_t> order(m.rows());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return m.item_ids[a] < m.item_ids[b]; });
    for (auto i : order) {
        if (!m.valid[i]) { r.invalid_rows.push_back(m.item_ids[i]); continue; }
        auto it = by_id.find(m.item_ids[i]);
        if (it == by_id.end()) { r.unlabeled_rows.push_back(m.item_ids[i]); continue; }
        rows.push_back(i);
        r.set.item_ids.push_back(m.item_ids[i]);
        r.set.outcomes.push_back(it->second->llm_outcome);
        r.set.z.push_back(label_correctness(it->second->llm_outcome, it->second->truth));
    }
    r.set.X.resize(static_cast<Eigen::Index>(rows.size()), m.values.cols());
    for (std::size_t k = 0; k < rows.size(); ++k)
        r.set.X.row(static_cast<Eigen::Index>(k)) = m.values.row(static_cast<Eigen::Index>(rows[k]));
    return r;
}

// ---------------------------------------------------------------------------
// Resampling

struct ResampleConfig {
    double target_majority_ratio = 4.0;
    bool protect_abstentions = true;
    bool strict = false;  // raise RatioUnreachable instead of relaxing the target
    std::uint64_t seed = kDefaultSeed;
};

namespace detail {

inline int majority_class(const LabeledSet& s) { return s.count(1) >= s.count(0) ? 1 : 0; }

inline bool is_protected(const LabeledSet& s, std::size_t i, bool protect) {
    return protect && is_abstention(s.outcomes[i]);
}

}  // namespace detail

// Majority members of cross-class mutual nearest-neighbour pairs, computed on
// z-scored features with Euclidean distance. Returned indices are ascending.
inline std::vector<std::size_t> tomek_links(const LabeledSet& s, bool protect_abstentions = true) {
    const auto n = s.size();
    if (s.count(0) == 0 || s.count(1) == 0) throw Error(ErrorCode::InvalidArgument, "tomek_links needs both classes");
    const auto order = s.canonical_order();
    const auto d = s.X.cols();

    Eigen::MatrixXd Z(static_cast<Eigen::Index>(n), d);
    for (std::size_t r = 0; r < n; ++r) Z.row(static_cast<Eigen::Index>(r)) = s.X.row(static_cast<Eigen::Index>(order[r]));
    for (Eigen::Index j = 0; j < d; ++j) {
        const double mean = Z.col(j).mean();
        const double sd = std::sqrt((Z.col(j).array() - mean).square().mean());
        Z.col(j) = (Z.col(j).array() - mean) / (sd > 0.0 ? sd : 1.0);
    }

    const Eigen::MatrixXd points = Z.transpose();  // one contiguous column per row
    std::vector<std::size_t> nn(n, 0);
    for (std::size_t a = 0; a < n; ++a) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = a;
        for (std::size_t b = 0; b < n; ++b) {
            if (b == a) continue;
            const double dist =
                (points.col(static_cast<Eigen::Index>(a)) - points.col(static_cast<Eigen::Index>(b))).squaredNorm();
            if (dist < best) {  // strict: ties keep the lower index
                best = dist;
                arg = b;
            }
        }
        nn[a] = arg;
    }

    const int maj = detail::majority_class(s);
    std::vector<std::size_t> removed;
    for (std::size_t a = 0; a < n; ++a) {
        const std::size_t b = nn[a];
        if (nn[b] != a) continue;
        const auto ia = order[a], ib = order[b];
        if (s.z[ia] == s.z[ib] || s.z[ia] != maj) continue;
        if (detail::is_protected(s, ia, protect_abstentions)) continue;
        removed.push_back(ia);
    }
    std::sort(removed.begin(), removed.end());
    return removed;
}

struct UndersampleResult {
    std::vector<std::size_t> keep;  // ascending row indices
    std::vector<std::string> warnings;
};

// Randomly drops majority rows until majority:minority <= target ratio. Rows
// listed in `exclude` (e.g. Tomek removals) are dropped up front.
inline UndersampleResult random_undersample(const LabeledSet& s, const ResampleConfig& cfg,
                                            const std::vector<std::size_t>& exclude = {}) {
    if (!(cfg.target_majority_ratio > 0.0)) throw Error(ErrorCode::InvalidArgument, "target ratio must be > 0");
    std::vector<bool> dropped(s.size(), false);
    for (auto i : exclude) dropped.at(i) = true;

    const int maj = detail::majority_class(s);
    std::vector<std::size_t> minority, protected_major, free_major;
    for (auto i : s.canonical_order()) {
        if (dropped[i]) continue;
        if (s.z[i] != maj) minority.push_back(i);
        else if (detail::is_protected(s, i, cfg.protect_abstentions)) protected_major.push_back(i);
        else free_major.push_back(i);
    }

    UndersampleResult r;
    const auto target = static_cast<std::size_t>(std::floor(cfg.target_majority_ratio * static_cast<double>(minority.size())));
    const auto n_major = protected_major.size() + free_major.size();
    std::vector<std::size_t> keep_major;
    if (n_major <= target) {
        keep_major = protected_major;
        keep_major.insert(keep_major.end(), free_major.begin(), free_major.end());
    } else {
        if (protected_major.size() > target) {
            if (cfg.strict)
                throw Error(ErrorCode::RatioUnreachable, "protected rows alone exceed the target ratio");
            r.warnings.push_back("protected abstentions (" + std::to_string(protected_major.size()) +
                                 ") exceed the target majority count (" + std::to_string(target) +
                                 "); target relaxed");
        }
        const auto fill = target > protected_major.size() ? target - protected_major.size() : 0;
        std::mt19937_64 rng(cfg.seed);
        std::shuffle(free_major.begin(), free_major.end(), rng);
        keep_major = protected_major;
        keep_major.insert(keep_major.end(), free_major.begin(), free_major.begin() + static_cast<std::ptrdiff_t>(fill));
    }
    r.keep = minority;
    r.keep.insert(r.keep.end(), keep_major.begin(), keep_major.end());
    std::sort(r.keep.begin(), r.keep.end());
    return r;
}

// Tomek cleaning followed by random undersampling.
inline UndersampleResult resample(const LabeledSet& s, const ResampleConfig& cfg) {
    const auto links = tomek_links(s, cfg.protect_abstentions);
    return random_undersample(s, cfg, links);
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
    std::size_t test_negative_count = 150;
    double validation_fraction = 0.20;
    std::uint64_t seed = kDefaultSeed;
};

inline std::size_t profile_test_negatives(std::string_view profile) {
    if (profile == "openai-mod") return 150;
    if (profile == "multimodal") return 45;
    throw Error(ErrorCode::InvalidArgument, "unknown dataset profile '" + std::string(profile) + "'");
}

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

inline SplitIndices stratified_split(const LabeledSet& s, const SplitSpec& spec) {
    if (!(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0))
        throw Error(ErrorCode::InvalidArgument, "validation fraction must be in (0,1)");
    std::vector<std::size_t> neg, pos;
    for (auto i : s.canonical_order()) (s.z[i] == 0 ? neg : pos).push_back(i);
    if (spec.test_negative_count > neg.size())
        throw Error(ErrorCode::InsufficientNegatives,
                    "requested " + std::to_string(spec.test_negative_count) + " test negatives, have " +
                        std::to_string(neg.size()));

    std::mt19937_64 rng(spec.seed);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::shuffle(pos.begin(), pos.end(), rng);

    const std::size_t test_neg = spec.test_negative_count;
    const std::size_t test_pos =
        neg.empty() ? 0
                    : std::min(pos.size(), static_cast<std::size_t>(std::llround(
                                               static_cast<double>(test_neg) * static_cast<double>(pos.size()) /
                                               static_cast<double>(neg.size()))));
    const std::size_t rem_neg = neg.size() - test_neg;
    const std::size_t rem_pos = pos.size() - test_pos;
    const auto val_neg = static_cast<std::size_t>(std::llround(spec.validation_fraction * static_cast<double>(rem_neg)));
    const auto val_pos = static_cast<std::size_t>(std::llround(spec.validation_fraction * static_cast<double>(rem_pos)));
    if (rem_neg - val_neg == 0)
        throw Error(ErrorCode::InsufficientNegatives, "no negatives left for training after the test split");
    if (rem_pos - val_pos == 0)
        throw Error(ErrorCode::InvalidArgument, "no positives left for training after the test split");

    SplitIndices out;
    auto take = [](std::vector<std::size_t>& dst, const std::vector<std::size_t>& src, std::size_t from, std::size_t to) {
        dst.insert(dst.end(), src.begin() + static_cast<std::ptrdiff_t>(from), src.begin() + static_cast<std::ptrdiff_t>(to));
    };
    take(out.test, neg, 0, test_neg);
    take(out.test, pos, 0, test_pos);
    take(out.validation, neg, test_neg, test_neg + val_neg);
    take(out.validation, pos, test_pos, test_pos + val_pos);
    take(out.train, neg, test_neg + val_neg, neg.size());
    take(out.train, pos, test_pos + val_pos, pos.size());

    auto by_id = [&](std::size_t a, std::size_t b) { return s.item_ids[a] < s.item_ids[b]; };
    std::sort(out.train.begin(), out.train.end(), by_id);
    std::sort(out.validation.begin(), out.validation.end(), by_id);
    std::sort(out.test.begin(), out.test.end(), by_id);
    return out;
}

}  // namespace lppgate
