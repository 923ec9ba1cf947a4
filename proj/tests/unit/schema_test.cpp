#include "lppgate/schema.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace lppgate;

namespace {

StructuredResponse parsed(std::string_view raw, std::optional<PromptMode> mode = std::nullopt) {
    auto r = parse_structured_response(raw, mode);
    if (auto* f = std::get_if<ParseFailure>(&r)) ADD_FAILURE() << to_string(f->kind) << ": " << f->detail;
    return std::get<StructuredResponse>(r);
}

ParseFailureKind failure_kind(std::string_view raw, std::optional<PromptMode> mode = std::nullopt) {
    auto r = parse_structured_response(raw, mode);
    EXPECT_TRUE(std::holds_alternative<ParseFailure>(r));
    return std::get<ParseFailure>(r).kind;
}

}  // namespace

TEST(Parse, DirectFieldMapping) {
    auto s = parsed(R"({"outcome":"1","p_correct":85,"band":"H"})");
    EXPECT_EQ(s.outcome, OutcomeLabel::Yes);
    EXPECT_TRUE(s.reasoning_steps.empty());
    EXPECT_EQ(s.p_correct, 85);
    EXPECT_EQ(s.band, ConfidenceBand::H);
}

TEST(Parse, UnknownOutcomeIsMissing) {
    EXPECT_EQ(failure_kind(R"({"outcome":"maybe"})"), ParseFailureKind::MissingOutcome);
}

TEST(Parse, WordOutcomeAndSnappedConfidence) {
    auto s = parsed(R"({"outcome":"inconclusive_evidence","p_correct":87})");
    EXPECT_EQ(s.outcome, OutcomeLabel::InconclusiveEvidence);
    EXPECT_EQ(s.p_correct, 85);
    EXPECT_FALSE(s.band.has_value());
}

TEST(Parse, NoObjectIsMalformed) {
    EXPECT_EQ(failure_kind("the answer is 1"), ParseFailureKind::MalformedJson);
    EXPECT_EQ(failure_kind(R"({"outcome":"1")"), ParseFailureKind::MalformedJson);
}

TEST(Parse, InvalidBand) {
    EXPECT_EQ(failure_kind(R"({"outcome":"0","band":"XL"})"), ParseFailureKind::InvalidBand);
}

TEST(Parse, ReasoningSteps) {
    auto s = parsed(R"({"reasoning_steps":[{"step_number":1,"description":"a"},{"step_number":2,"description":"b"}],"outcome":"0"})");
    ASSERT_EQ(s.reasoning_steps.size(), 2u);
    EXPECT_EQ(s.reasoning_steps[1].description, "b");
    EXPECT_EQ(s.outcome, OutcomeLabel::No);
}

TEST(Normalize, Examples) {
    EXPECT_EQ(normalize_outcome_token(" 2 "), OutcomeLabel::InconclusiveEvidence);
    EXPECT_EQ(normalize_outcome_token("YES"), OutcomeLabel::Yes);
    EXPECT_EQ(normalize_outcome_token("4"), std::nullopt);
    EXPECT_EQ(normalize_outcome_token("\"3\""), OutcomeLabel::InconclusiveDefinition);
    EXPECT_EQ(normalize_outcome_token("{"), std::nullopt);
}

TEST(Normalize, IdempotentOnCanonicalSurface) {
    for (auto l : kAllLabels) EXPECT_EQ(normalize_outcome_token(canonical_surface(l)), l);
}

TEST(Snap, Examples) {
    EXPECT_EQ(snap_confidence(87LL), 85);
    EXPECT_EQ(snap_confidence(88LL), 90);
    EXPECT_EQ(snap_confidence(100LL), 100);
    EXPECT_EQ(snap_confidence(-7LL), 0);
    EXPECT_EQ(snap_confidence(140LL), 100);
}

TEST(Snap, MultipleOfFiveNearest) {
    for (long long v = 0; v <= 100; ++v) {
        const int s = snap_confidence(v);
        EXPECT_EQ(s % 5, 0);
        EXPECT_LE(std::llabs(s - v), 2);
    }
}

TEST(Retry, Examples) {
    const ParseFailure bad{ParseFailureKind::MalformedJson, ""};
    EXPECT_EQ(decide_retry(1, std::nullopt), RetryDecision::Accept);
    EXPECT_EQ(decide_retry(3, bad), RetryDecision::Retry);
    EXPECT_EQ(decide_retry(4, bad), RetryDecision::GiveUp);
    EXPECT_LPP_ERROR(decide_retry(0, std::nullopt), ErrorCode::InvalidArgument);
}

TEST(TokenRecord, NormalizationSortsAndTruncates) {
    TokenRecord r;
    for (int i = 0; i < 25; ++i) r.candidates.push_back({"t" + std::to_string(i), -0.1 * i - 1.0});
    std::reverse(r.candidates.begin(), r.candidates.end());
    r.chosen = {"t3", -1.3};
    normalize_token_record(r);
    ASSERT_EQ(r.candidates.size(), kTopLogprobs);
    for (std::size_t i = 1; i < r.candidates.size(); ++i)
        EXPECT_GE(r.candidates[i - 1].logprob, r.candidates[i].logprob);
}

TEST(Trace, JsonlRoundTrip) {
    ResponseTrace t;
    t.item_id = "a-1";
    t.structured.outcome = OutcomeLabel::InconclusiveDefinition;
    t.structured.p_correct = 40;
    t.structured.band = ConfidenceBand::L;
    t.structured.reasoning_steps = {{1, "first"}};
    TokenRecord rec;
    rec.chosen = {"3", std::log(0.7)};
    rec.candidates = {{"3", std::log(0.7)}, {"1", std::log(0.2)}, {" 3", std::log(0.05)}};
    t.tokens.push_back(rec);
    t.attempt = 2;
    ResponseTrace u = t;
    u.item_id = "a-2";
    u.logprobs_available = false;
    u.tokens.clear();

    const auto text = to_jsonl({t, u});
    const auto back = traces_from_jsonl(text);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], t);
    EXPECT_EQ(back[1], u);
    EXPECT_EQ(to_jsonl(back), text);
}

TEST(Trace, RejectsMultipleOutcomeTokens) {
    ResponseTrace t;
    t.item_id = "x";
    TokenRecord rec;
    rec.chosen = {"1", -0.1};
    rec.candidates = {rec.chosen};
    t.tokens = {rec, rec};
    EXPECT_LPP_ERROR(validate_trace(t), ErrorCode::InvalidArgument);
}
