#include "lppgate/features.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>

using namespace lppgate;

namespace {

std::vector<TokenCandidate> cands(std::initializer_list<std::pair<const char*, double>> ps) {
    std::vector<TokenCandidate> out;
    for (auto [s, p] : ps) out.push_back({s, std::log(p)});
    std::stable_sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.logprob > b.logprob; });
    return out;
}

// Reference entropy in bits from probabilities, computed in long double.
long double ref_entropy(const std::vector<long double>& p) {
    long double h = 0;
    for (auto v : p)
        if (v > 0) h -= v * std::log2(v);
    return h;
}

ResponseTrace direct_trace(const char* id, OutcomeLabel out) {
    ResponseTrace t;
    t.item_id = id;
    t.structured.outcome = out;
    t.structured.p_correct = 85;
    t.structured.band = ConfidenceBand::H;
    TokenRecord r;
    r.candidates = cands({{"1", 0.7}, {"0", 0.2}, {" 1", 0.05}, {"x", 0.03}, {"2", 0.02}});
    r.chosen = r.candidates[0];
    t.tokens.push_back(r);
    return t;
}

}  // namespace

TEST(Renormalize, Examples) {
    const std::vector<double> eq(5, -1.3);
    for (double p : renormalize_topk(eq).probs) EXPECT_NEAR(p, 0.2, 1e-15);

    const std::vector<double> dy{std::log(.5), std::log(.25), std::log(.125), std::log(.0625), std::log(.0625)};
    const auto d = renormalize_topk(dy).probs;
    const double want[] = {.5, .25, .125, .0625, .0625};
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(d[i], want[i], 1e-15);

    const std::vector<double> delta{0, -50, -50, -50, -50};
    EXPECT_NEAR(renormalize_topk(delta).probs[0], 1.0, 1e-9);

    EXPECT_LPP_ERROR(renormalize_topk(std::vector<double>{}), ErrorCode::EmptyCandidates);
}

TEST(Renormalize, ShiftInvariance) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-8, 0), c(-30, 30);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> lp(5), shifted(5);
        const double k = c(rng);
        for (int i = 0; i < 5; ++i) {
            lp[i] = u(rng);
            shifted[i] = lp[i] + k;
        }
        const auto a = renormalize_topk(lp).probs, b = renormalize_topk(shifted).probs;
        for (int i = 0; i < 5; ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
    }
}

TEST(TopK, Uniform) {
    const auto s = compute_topk_features(renormalize_topk(std::vector<double>(5, -2.0)));
    EXPECT_NEAR(s.entropy, std::log2(5.0), 1e-12);
    EXPECT_NEAR(s.normalized_entropy, 1.0, 1e-12);
    EXPECT_NEAR(s.effective_choices, 5.0, 1e-12);
    EXPECT_NEAR(s.msp, 0.2, 1e-12);
    EXPECT_NEAR(s.top2_margin, 0.0, 1e-12);
    EXPECT_NEAR(s.top1_top2_ratio, 1.0, 1e-12);
}

TEST(TopK, Dyadic) {
    const std::vector<double> p{.5, .25, .125, .0625, .0625};
    const auto s = distribution_stats(p, 5);
    EXPECT_DOUBLE_EQ(s.entropy, 1.875);
    EXPECT_DOUBLE_EQ(s.effective_choices, std::exp2(1.875));
    EXPECT_DOUBLE_EQ(s.msp, .5);
    EXPECT_DOUBLE_EQ(s.top2_margin, .25);
    EXPECT_DOUBLE_EQ(s.top2_margin_normalized, .5);
    EXPECT_DOUBLE_EQ(s.top1_top2_ratio, 2.0);
}

TEST(TopK, Delta) {
    const std::vector<double> p{1, 0, 0, 0, 0};
    const auto s = distribution_stats(p, 5);
    EXPECT_EQ(s.entropy, 0.0);
    EXPECT_EQ(s.effective_choices, 1.0);
    EXPECT_EQ(s.confidence, 1.0);
    EXPECT_EQ(s.msp, 1.0);
    EXPECT_EQ(s.top2_margin, 1.0);
}

TEST(TopK, OracleAndBounds) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-12, 0);
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<double> lp(5);
        for (auto& v : lp) v = u(rng);
        const auto d = renormalize_topk(lp);
        const auto s = compute_topk_features(d);

        std::vector<long double> ref;
        long double tot = 0;
        for (double v : lp) tot += std::exp(static_cast<long double>(v));
        for (double v : lp) ref.push_back(std::exp(static_cast<long double>(v)) / tot);
        std::sort(ref.begin(), ref.end(), std::greater<>());
        const long double h = ref_entropy(ref);
        EXPECT_NEAR(s.entropy, static_cast<double>(h), 1e-9);
        EXPECT_NEAR(s.msp, static_cast<double>(ref[0]), 1e-9);
        EXPECT_NEAR(s.top2_margin, static_cast<double>(ref[0] - ref[1]), 1e-9);
        EXPECT_NEAR(s.top1_top2_ratio, static_cast<double>(ref[0] / ref[1]), 1e-9 * s.top1_top2_ratio);

        EXPECT_GE(s.entropy, 0.0);
        EXPECT_LE(s.entropy, std::log2(5.0) + 1e-12);
        EXPECT_GE(s.effective_choices, 1.0 - 1e-12);
        EXPECT_LE(s.effective_choices, 5.0 + 1e-12);
        EXPECT_GE(s.msp, 0.2 - 1e-12);
        EXPECT_GE(s.top1_top2_ratio, 1.0);
        EXPECT_EQ(s.confidence, 1.0 - s.normalized_entropy);
        EXPECT_EQ(s.effective_choices, std::exp2(s.entropy));
    }
}

TEST(Collapse, MixedSurfaces) {
    const auto c = cands({{"0", .4}, {" 0", .2}, {"1", .3}, {"2", .05}, {"x", .05}});
    const auto d = collapse_to_labels(c, label_support(false));
    EXPECT_NEAR(d.probs[0], 12.0 / 19, 1e-12);
    EXPECT_NEAR(d.probs[1], 6.0 / 19, 1e-12);
    EXPECT_NEAR(d.probs[2], 1.0 / 19, 1e-12);
    EXPECT_EQ(d.probs[3], 0.0);

    const auto f = compute_filtered_features(d);
    EXPECT_NEAR(f.msp, 12.0 / 19, 1e-12);
    EXPECT_NEAR(f.top2_margin, 6.0 / 19, 1e-12);
    EXPECT_NEAR(f.top1_top2_ratio, 2.0, 1e-12);
}

TEST(Collapse, AlreadyNormalizedAndEmpty) {
    const auto d = collapse_to_labels(cands({{"0", .5}, {"1", .5}}), label_support(false));
    EXPECT_DOUBLE_EQ(d.probs[0], .5);
    EXPECT_DOUBLE_EQ(d.probs[1], .5);
    EXPECT_EQ(d.probs[2], 0.0);
    EXPECT_EQ(d.probs[3], 0.0);
    EXPECT_LPP_ERROR(collapse_to_labels(cands({{"foo", 1.0}}), label_support(false)), ErrorCode::NoLabelMass);
}

TEST(Collapse, BinarySupportDropsAbstentions) {
    const auto d = collapse_to_labels(cands({{"0", .3}, {"1", .3}, {"2", .4}}), label_support(true));
    EXPECT_DOUBLE_EQ(d.probs[0], .5);
    EXPECT_DOUBLE_EQ(d.probs[1], .5);
}

TEST(Filtered, UniformAndDelta) {
    LabelDistribution u;
    u.support = label_support(false);
    u.probs = {.25, .25, .25, .25};
    const auto s = compute_filtered_features(u);
    EXPECT_DOUBLE_EQ(s.entropy, 2.0);
    EXPECT_DOUBLE_EQ(s.normalized_entropy, 1.0);
    EXPECT_DOUBLE_EQ(s.effective_choices, 4.0);

    LabelDistribution d = u;
    d.probs = {1, 0, 0, 0};
    const auto t = compute_filtered_features(d);
    EXPECT_EQ(t.entropy, 0.0);
    EXPECT_EQ(t.confidence, 1.0);
}

TEST(Filtered, SurfaceSplitInvariance) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.01, 1.0), share(0.05, 0.95);
    for (int rep = 0; rep < 200; ++rep) {
        const double a = u(rng), b = u(rng), c = u(rng), s = share(rng);
        std::vector<TokenCandidate> whole{{"0", std::log(a)}, {"1", std::log(b)}, {"x", std::log(c)}};
        std::vector<TokenCandidate> split{{"0", std::log(a * s)}, {" 0", std::log(a * (1 - s))},
                                          {"1", std::log(b)}, {"x", std::log(c)}};
        const auto f1 = compute_filtered_features(collapse_to_labels(whole, label_support(false)));
        const auto f2 = compute_filtered_features(collapse_to_labels(split, label_support(false)));
        EXPECT_NEAR(f1.entropy, f2.entropy, 1e-9);
        EXPECT_NEAR(f1.top2_margin, f2.top2_margin, 1e-9);
        EXPECT_NEAR(f1.top1_top2_ratio, f2.top1_top2_ratio, 1e-9 * f1.top1_top2_ratio);
        EXPECT_NEAR(f1.effective_choices, f2.effective_choices, 1e-9);
    }
}

TEST(LogOdds, Examples) {
    auto [m, n] = detail::log_margin(-0.1, -2.1);
    EXPECT_NEAR(m, -2.0, 1e-12);
    EXPECT_NEAR(n, 0.952381, 1e-6);

    std::tie(m, n) = detail::log_margin(-0.7, -0.7);
    EXPECT_EQ(m, 0.0);
    EXPECT_EQ(n, 0.0);

    const std::vector<TokenCandidate> one{{"1", -0.01}};
    const auto f = compute_logodds_features(one, std::nullopt);
    EXPECT_FALSE(f.valid);
    EXPECT_EQ(f.margin, 0.0);
    EXPECT_EQ(f.margin_normalized, 0.0);
}

TEST(LogOdds, FilteredPairNeedsTwoLabels) {
    const auto c = cands({{"1", .9}, {"x", .1}});
    const auto ld = collapse_to_labels(c, label_support(false));
    const auto f = compute_logodds_features(c, ld);
    EXPECT_TRUE(f.valid);
    EXPECT_FALSE(f.filtered_valid);
    EXPECT_EQ(f.filtered_margin, 0.0);
}

TEST(Sequence, HalfProbabilityTokens) {
    std::vector<TokenRecord> rs(4);
    for (auto& r : rs) {
        r.span = Span::Reasoning;
        r.chosen = {"a", std::log(0.5)};
        r.candidates = {r.chosen, {"b", std::log(0.5)}};
    }
    const auto s = compute_sequence_features(rs);
    EXPECT_NEAR(s.nll, 4 * std::log(2.0), 1e-12);
    EXPECT_NEAR(s.perplexity, 2.0, 1e-12);
    EXPECT_NEAR(s.mean_token_entropy_bits, 1.0, 1e-12);
    EXPECT_TRUE(s.present);
}

TEST(Sequence, QuantilesAndEmpty) {
    const auto q = quantiles({4, 2, 0, 3, 1});
    for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(q[static_cast<std::size_t>(i)], i);
    EXPECT_DOUBLE_EQ(quantiles({0, 1})[1], 0.25);

    const auto s = compute_sequence_features(std::vector<TokenRecord>{});
    EXPECT_FALSE(s.present);
    EXPECT_EQ(s.nll, 0.0);
    EXPECT_EQ(s.perplexity, 1.0);
}

TEST(Verbalized, Mapping) {
    StructuredResponse s;
    s.p_correct = 85;
    s.band = ConfidenceBand::H;
    auto v = compute_verbalized_features(s);
    EXPECT_DOUBLE_EQ(v.confidence, 0.85);
    EXPECT_FALSE(v.confidence_missing);
    EXPECT_EQ(v.band_one_hot, (std::array<double, 5>{0, 0, 0, 1, 0}));

    v = compute_verbalized_features(StructuredResponse{});
    EXPECT_EQ(v.band_one_hot, (std::array<double, 5>{}));
    EXPECT_DOUBLE_EQ(v.confidence, 0.5);
    EXPECT_TRUE(v.confidence_missing);
}

TEST(Attribution, Flags) {
    auto a = compute_attribution_features(OutcomeLabel::Yes);
    EXPECT_EQ((std::array{a.evidence_deficit, a.policy_gap, a.inconclusive}), (std::array{0.0, 0.0, 0.0}));
    a = compute_attribution_features(OutcomeLabel::InconclusiveEvidence);
    EXPECT_EQ((std::array{a.evidence_deficit, a.policy_gap, a.inconclusive}), (std::array{1.0, 0.0, 1.0}));
    a = compute_attribution_features(OutcomeLabel::InconclusiveDefinition);
    EXPECT_EQ((std::array{a.evidence_deficit, a.policy_gap, a.inconclusive}), (std::array{0.0, 1.0, 1.0}));
}

TEST(Assemble, FamilyWidths) {
    const std::size_t widths[] = {8, 7, 6, 3, 11, 7, 3};
    for (std::size_t i = 0; i < kFamilyCount; ++i) EXPECT_EQ(feature_names(kAllFamilies[i]).size(), widths[i]);
    EXPECT_EQ(feature_names(FamilySet::all()).size(), 45u);
}

TEST(Assemble, DirectTraceAllFamilies) {
    const auto fv = assemble_feature_vector(direct_trace("a", OutcomeLabel::Yes), FamilySet::all());
    EXPECT_TRUE(fv.valid);
    EXPECT_EQ(fv.entries.size(), 45u);
    EXPECT_EQ(fv.get("sequence_cot.reasoning_present"), 0.0);
    EXPECT_EQ(fv.get("sequence_cot.nll"), 0.0);
    EXPECT_EQ(fv.get("token_level_cot.mean_entropy"), 0.0);
    EXPECT_DOUBLE_EQ(*fv.get("verbalized.p_correct"), 0.85);
    EXPECT_DOUBLE_EQ(*fv.get("outcome_topk.msp"), 0.7);
    const auto names = feature_names(FamilySet::all());
    for (std::size_t i = 0; i < names.size(); ++i) EXPECT_EQ(fv.entries[i].qualified_name(), names[i]);
}

TEST(Assemble, SubsetsAndAblation) {
    const auto t = direct_trace("a", OutcomeLabel::Yes);
    EXPECT_EQ(assemble_feature_vector(t, FamilySet::parse("outcome_topk")).entries.size(), 8u);
    const auto fv = assemble_feature_vector(t, FamilySet::all().without(FeatureFamily::Attribution));
    EXPECT_EQ(fv.entries.size(), 42u);
    EXPECT_FALSE(fv.get("attribution.inconclusive").has_value());
    EXPECT_LPP_ERROR(assemble_feature_vector(t, FamilySet{}), ErrorCode::InvalidArgument);
}

TEST(Assemble, InvalidMarkers) {
    auto t = direct_trace("a", OutcomeLabel::Yes);
    t.tokens[0].candidates = {{"x", -0.1}, {"y", -3.0}};
    t.tokens[0].chosen = t.tokens[0].candidates[0];
    auto fv = assemble_feature_vector(t, FamilySet::all());
    EXPECT_FALSE(fv.valid);
    EXPECT_EQ(fv.entries.size(), 45u);

    auto g = direct_trace("b", OutcomeLabel::Yes);
    g.logprobs_available = false;
    g.tokens.clear();
    fv = assemble_feature_vector(g, FamilySet::all());
    EXPECT_FALSE(fv.valid);
    EXPECT_EQ(fv.invalid_reason, "gray-box unavailable");
}

TEST(Matrix, CsvRoundTripAndDeterminism) {
    std::vector<ResponseTrace> ts{direct_trace("b", OutcomeLabel::No), direct_trace("a", OutcomeLabel::Yes)};
    const auto m = build_feature_matrix(ts, FamilySet::all());
    const auto csv = to_csv(m);
    EXPECT_EQ(csv, to_csv(build_feature_matrix(ts, FamilySet::all())));
    const auto back = feature_matrix_from_csv(csv);
    EXPECT_EQ(back.item_ids, m.item_ids);
    EXPECT_EQ(back.columns, m.columns);
    EXPECT_EQ(back.values, m.values);
    EXPECT_EQ(to_csv(back), csv);
}
