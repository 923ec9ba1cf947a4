#include "lppgate/dataset.hpp"
#include "test_util.hpp"

#include <cstdio>
#include <random>
#include <set>

using namespace lppgate;

namespace {

std::string id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "r%05zu", i);
    return buf;
}

LabeledSet make_set(const std::vector<double>& x, const std::vector<int>& z,
                    std::vector<OutcomeLabel> outcomes = {}) {
    LabeledSet s;
    s.columns = {"f.x"};
    s.X.resize(static_cast<Eigen::Index>(x.size()), 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
        s.item_ids.push_back(id(i));
        s.X(static_cast<Eigen::Index>(i), 0) = x[i];
    }
    s.z = z;
    if (outcomes.empty()) outcomes.assign(x.size(), OutcomeLabel::Yes);
    s.outcomes = std::move(outcomes);
    return s;
}

LabeledSet random_set(std::size_t n, double pos_rate, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> x;
    std::vector<int> z;
    for (std::size_t i = 0; i < n; ++i) {
        z.push_back(u(rng) < pos_rate ? 1 : 0);
        x.push_back(u(rng) + z.back());
    }
    return make_set(x, z);
}

std::set<std::string> ids_of(const LabeledSet& s, const std::vector<std::size_t>& idx) {
    std::set<std::string> out;
    for (auto i : idx) out.insert(s.item_ids[i]);
    return out;
}

}  // namespace

TEST(Correctness, Rule) {
    EXPECT_EQ(label_correctness(OutcomeLabel::Yes, GroundTruth::Violating), 1);
    EXPECT_EQ(label_correctness(OutcomeLabel::No, GroundTruth::NonViolating), 1);
    EXPECT_EQ(label_correctness(OutcomeLabel::No, GroundTruth::Violating), 0);
    EXPECT_EQ(label_correctness(OutcomeLabel::Yes, GroundTruth::NonViolating), 0);
    EXPECT_EQ(label_correctness(OutcomeLabel::InconclusiveEvidence, GroundTruth::Violating), 0);
    EXPECT_EQ(label_correctness(OutcomeLabel::InconclusiveDefinition, GroundTruth::NonViolating), 0);
}

TEST(Labels, CsvRoundTrip) {
    std::vector<LabelRow> rows{{"a", GroundTruth::Violating, OutcomeLabel::Yes},
                               {"b", GroundTruth::NonViolating, OutcomeLabel::InconclusiveDefinition}};
    const auto back = labels_from_csv(labels_to_csv(rows));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].item_id, "b");
    EXPECT_EQ(back[1].truth, GroundTruth::NonViolating);
    EXPECT_EQ(back[1].llm_outcome, OutcomeLabel::InconclusiveDefinition);
}

TEST(Tomek, OneDimensional) {
    // Majority (z=1) at 0.0 and 0.9, minority at 1.0.
    const auto s = make_set({0.0, 0.9, 1.0}, {1, 1, 0});
    EXPECT_EQ(tomek_links(s), (std::vector<std::size_t>{1}));
}

TEST(Tomek, SeparatedClustersHaveNoLinks) {
    const auto s = make_set({0.0, 0.1, 0.2, 100.0, 100.1}, {1, 1, 1, 0, 0});
    EXPECT_TRUE(tomek_links(s).empty());
}

TEST(Tomek, DuplicateAcrossClasses) {
    const auto s = make_set({0.0, 3.0, 5.0, 3.0, 10.0}, {1, 1, 1, 0, 0});
    EXPECT_EQ(tomek_links(s), (std::vector<std::size_t>{1}));
}

TEST(Tomek, ProtectedAbstentionKept) {
    const auto s = make_set({0.0, 0.9, 1.0}, {1, 1, 0},
                            {OutcomeLabel::Yes, OutcomeLabel::InconclusiveEvidence, OutcomeLabel::No});
    EXPECT_TRUE(tomek_links(s).empty());
    EXPECT_EQ(tomek_links(s, false), (std::vector<std::size_t>{1}));
}

TEST(Undersample, RatioArithmetic) {
    std::vector<double> x(100);
    std::vector<int> z(100, 1);
    for (std::size_t i = 0; i < 10; ++i) z[i] = 0;
    const auto s = make_set(x, z);
    ResampleConfig cfg;
    const auto r = random_undersample(s, cfg);
    const auto kept = s.subset(r.keep);
    EXPECT_EQ(kept.count(0), 10u);
    EXPECT_EQ(kept.count(1), 40u);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Undersample, AlreadySatisfiedIsIdentity) {
    std::vector<int> z{0, 0, 1, 1, 1};
    const auto s = make_set({0, 1, 2, 3, 4}, z);
    EXPECT_EQ(random_undersample(s, ResampleConfig{}).keep, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(Undersample, ProtectionRelaxesTarget) {
    // One minority row, ratio 2; three protected abstentions in the majority.
    std::vector<int> z{0, 1, 1, 1, 1, 1, 1, 1};
    std::vector<OutcomeLabel> o(8, OutcomeLabel::Yes);
    o[1] = o[2] = OutcomeLabel::InconclusiveEvidence;
    o[3] = OutcomeLabel::InconclusiveDefinition;
    // Abstentions are z=0 in real data; here only their protection matters.
    const auto s = make_set({0, 1, 2, 3, 4, 5, 6, 7}, z, o);
    ResampleConfig cfg;
    cfg.target_majority_ratio = 2.0;
    const auto r = random_undersample(s, cfg);
    EXPECT_EQ(r.keep, (std::vector<std::size_t>{0, 1, 2, 3}));
    EXPECT_EQ(r.warnings.size(), 1u);

    cfg.strict = true;
    EXPECT_LPP_ERROR(random_undersample(s, cfg), ErrorCode::RatioUnreachable);
}

TEST(Undersample, NeverDropsMinorityAndIsOrderIndependent) {
    const auto s = random_set(600, 0.85, 3);
    const auto r = resample(s, ResampleConfig{});
    const auto kept = s.subset(r.keep);
    EXPECT_EQ(kept.count(0), s.count(0));
    EXPECT_LE(kept.count(1), 4 * s.count(0));

    // Reverse the rows: the same item ids must survive.
    std::vector<std::size_t> rev(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) rev[i] = s.size() - 1 - i;
    const auto p = s.subset(rev);
    EXPECT_EQ(ids_of(p, resample(p, ResampleConfig{}).keep), ids_of(s, r.keep));
}

TEST(Split, CountsAndPartition) {
    const auto s = random_set(1000, 0.75, 42);
    const SplitSpec spec{150, 0.2, 42};
    const auto idx = stratified_split(s, spec);

    const auto test = s.subset(idx.test);
    EXPECT_EQ(test.count(0), 150u);
    const double ratio = static_cast<double>(s.count(1)) / static_cast<double>(s.count(0));
    EXPECT_LE(std::abs(static_cast<double>(test.count(1)) - 150.0 * ratio), 1.0);

    std::set<std::size_t> all;
    for (const auto* part : {&idx.train, &idx.validation, &idx.test})
        for (auto i : *part) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), s.size());

    const auto val = s.subset(idx.validation);
    const auto rem = s.size() - idx.test.size();
    EXPECT_LE(std::abs(static_cast<double>(idx.validation.size()) - 0.2 * static_cast<double>(rem)), 1.0);
    EXPECT_GT(val.count(0), 0u);
    EXPECT_GT(s.subset(idx.train).count(0), 0u);
}

TEST(Split, DeterministicAndOrderIndependent) {
    const auto s = random_set(800, 0.8, 9);
    const SplitSpec spec{45, 0.2, 42};
    const auto a = stratified_split(s, spec), b = stratified_split(s, spec);
    EXPECT_EQ(a.test, b.test);
    EXPECT_EQ(a.train, b.train);

    std::vector<std::size_t> rev(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) rev[i] = s.size() - 1 - i;
    const auto p = s.subset(rev);
    const auto c = stratified_split(p, spec);
    EXPECT_EQ(ids_of(p, c.test), ids_of(s, a.test));
    EXPECT_EQ(ids_of(p, c.validation), ids_of(s, a.validation));
}

TEST(Split, InsufficientNegatives) {
    const auto s = random_set(300, 0.8, 1);
    EXPECT_LPP_ERROR(stratified_split(s, SplitSpec{s.count(0), 0.2, 42}), ErrorCode::InsufficientNegatives);
    EXPECT_LPP_ERROR(stratified_split(s, SplitSpec{s.count(0) + 1, 0.2, 42}), ErrorCode::InsufficientNegatives);
}

TEST(Split, Profiles) {
    EXPECT_EQ(profile_test_negatives("openai-mod"), 150u);
    EXPECT_EQ(profile_test_negatives("multimodal"), 45u);
    EXPECT_LPP_ERROR(profile_test_negatives("other"), ErrorCode::InvalidArgument);
}
