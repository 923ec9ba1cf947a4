#include "lppgate/pipeline.hpp"
#include "lppgate/synth.hpp"
#include "test_util.hpp"

using namespace lppgate;

namespace {

PipelineConfig quick_config() {
    PipelineConfig c;
    c.grid.alphas = {1.0, 10.0};
    c.grid.tols = {1e-4};
    c.grid.max_iters = {1000};
    c.grid.class_weights = {class_weight_preset("1:1"), class_weight_preset("0.64:1")};
    c.threads = 2;
    return c;
}

PipelineResult run_preset(const std::string& preset, std::size_t n, const PipelineConfig& pc) {
    auto cfg = SynthConfig::preset(preset);
    cfg.n_items = n;
    const auto corpus = generate_synthetic(cfg);
    return run_pipeline(build_feature_matrix(corpus.traces, FamilySet::all()), corpus.labels, pc);
}

const MethodResult& method(const ComparisonReport& r, const std::string& name) {
    for (const auto& m : r.methods)
        if (m.method == name) return m;
    throw std::runtime_error("no method " + name);
}

}  // namespace

TEST(Synth, DeterministicBySeed) {
    SynthConfig cfg;
    cfg.n_items = 300;
    cfg.signal.reasoning = true;
    const auto a = generate_synthetic(cfg), b = generate_synthetic(cfg);
    EXPECT_EQ(to_jsonl(a.traces), to_jsonl(b.traces));
    EXPECT_EQ(labels_to_csv(a.labels), labels_to_csv(b.labels));
    cfg.seed = 7;
    EXPECT_NE(to_jsonl(generate_synthetic(cfg).traces), to_jsonl(a.traces));
}

TEST(Synth, RealizedRatesAndCorrectness) {
    for (auto [err, abst] : {std::pair{0.15, 0.03}, std::pair{0.30, 0.10}, std::pair{0.05, 0.0}}) {
        SynthConfig cfg;
        cfg.n_items = 2000;
        cfg.error_rate = err;
        cfg.abstention_rate = abst;
        const auto c = generate_synthetic(cfg);
        std::size_t errors = 0, abstentions = 0;
        for (std::size_t i = 0; i < c.labels.size(); ++i) {
            EXPECT_EQ(label_correctness(c.labels[i].llm_outcome, c.labels[i].truth), c.z[i]);
            errors += c.z[i] == 0;
            abstentions += is_abstention(c.labels[i].llm_outcome);
        }
        EXPECT_NEAR(static_cast<double>(errors) / 2000.0, err, 0.02);
        EXPECT_NEAR(static_cast<double>(abstentions) / 2000.0, abst, 0.02);
    }
}

TEST(Synth, TracesAreValid) {
    SynthConfig cfg;
    cfg.n_items = 200;
    cfg.signal.reasoning = true;
    const auto c = generate_synthetic(cfg);
    for (const auto& t : c.traces) {
        EXPECT_NO_THROW(validate_trace(t));
        EXPECT_EQ(t.tokens.size(), 13u);
        EXPECT_EQ(normalize_outcome_token(t.outcome_token()->chosen.surface), t.structured.outcome);
    }
    const auto m = build_feature_matrix(c.traces, FamilySet::all());
    for (bool v : m.valid) EXPECT_TRUE(v);
}

TEST(Synth, ConfigValidation) {
    SynthConfig cfg;
    cfg.abstention_rate = 0.2;
    cfg.error_rate = 0.1;
    EXPECT_LPP_ERROR(cfg.validate(), ErrorCode::InvalidArgument);
    EXPECT_LPP_ERROR(SynthConfig::preset("strong"), ErrorCode::InvalidArgument);
}

TEST(Synth, NoSignalGivesChanceAuc) {
    const auto r = run_preset("none", 3000, quick_config());
    const auto auc = meta_result(r.report).test.auc_roc;
    ASSERT_TRUE(auc.has_value());
    EXPECT_GE(*auc, 0.4);
    EXPECT_LE(*auc, 0.6);
}

TEST(Synth, MspOnlySignalMatchesMspBaseline) {
    // Full default grid, so the comparison does not depend on a reduced search.
    const auto r = run_preset("msp-only", 3000, PipelineConfig{});
    const double meta = meta_result(r.report).test.expected_cost;
    const double msp = method(r.report, "MSP").test.expected_cost;
    EXPECT_LE(std::abs(meta - msp), 0.05 * std::abs(msp)) << "meta " << meta << " msp " << msp;
}
