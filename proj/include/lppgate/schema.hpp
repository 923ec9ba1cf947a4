#pragma once

// Integer-token output schema: outcome labels, structured responses, token
// traces, lenient JSON extraction and the deterministic retry contract.

#include "lppgate/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lppgate {

using ordered_json = nlohmann::ordered_json;

enum class OutcomeLabel : std::uint8_t {
    No = 0,
    Yes = 1,
    InconclusiveEvidence = 2,
    InconclusiveDefinition = 3,
};

inline constexpr std::array<OutcomeLabel, 4> kAllLabels{
    OutcomeLabel::No, OutcomeLabel::Yes, OutcomeLabel::InconclusiveEvidence,
    OutcomeLabel::InconclusiveDefinition};

inline constexpr int to_int(OutcomeLabel l) { return static_cast<int>(l); }

inline bool is_abstention(OutcomeLabel l) {
    return l == OutcomeLabel::InconclusiveEvidence || l == OutcomeLabel::InconclusiveDefinition;
}

inline std::optional<OutcomeLabel> outcome_from_int(long long v) {
    if (v < 0 || v > 3) return std::nullopt;
    return static_cast<OutcomeLabel>(v);
}

// The digit surface a label is emitted as.
inline std::string canonical_surface(OutcomeLabel l) { return std::to_string(to_int(l)); }

enum class ConfidenceBand : std::uint8_t { VL = 0, L = 1, M = 2, H = 3, VH = 4 };

inline constexpr std::array<std::string_view, 5> kBandNames{"VL", "L", "M", "H", "VH"};

inline std::string_view to_string(ConfidenceBand b) { return kBandNames[static_cast<std::size_t>(b)]; }

inline std::optional<ConfidenceBand> parse_band(std::string_view s) {
    std::string up;
    for (char c : trim(s)) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    for (std::size_t i = 0; i < kBandNames.size(); ++i)
        if (up == kBandNames[i]) return static_cast<ConfidenceBand>(i);
    return std::nullopt;
}

struct ReasoningStep {
    int step_number = 0;
    std::string description;

    bool operator==(const ReasoningStep&) const = default;
};

struct StructuredResponse {
    OutcomeLabel outcome = OutcomeLabel::No;
    std::vector<ReasoningStep> reasoning_steps;
    std::optional<int> p_correct;
    std::optional<ConfidenceBand> band;

    bool operator==(const StructuredResponse&) const = default;
};

struct TokenCandidate {
    std::string surface;
    double logprob = 0.0;

    bool operator==(const TokenCandidate&) const = default;
};

enum class Span : std::uint8_t { Outcome, Reasoning };

struct TokenRecord {
    TokenCandidate chosen;
    std::vector<TokenCandidate> candidates;
    Span span = Span::Outcome;

    bool operator==(const TokenRecord&) const = default;
};

inline constexpr int kMaxAttempts = 4;       // initial request + 3 retries
inline constexpr std::size_t kTopLogprobs = 20;
inline constexpr double kLogprobTolerance = 1e-9;

struct ResponseTrace {
    std::string item_id;
    StructuredResponse structured;
    std::vector<TokenRecord> tokens;
    int attempt = 1;
    bool logprobs_available = true;

    const TokenRecord* outcome_token() const {
        for (const auto& t : tokens)
            if (t.span == Span::Outcome) return &t;
        return nullptr;
    }

    bool operator==(const ResponseTrace&) const = default;
};

enum class PromptMode : std::uint8_t { Direct, ChainOfThought };

enum class ParseFailureKind : std::uint8_t {
    MalformedJson,
    MissingOutcome,
    InvalidBand,
    InvalidSteps,
    OutcomeTokenNotFound,
};

inline std::string_view to_string(ParseFailureKind k) {
    switch (k) {
        case ParseFailureKind::MalformedJson: return "MalformedJson";
        case ParseFailureKind::MissingOutcome: return "MissingOutcome";
        case ParseFailureKind::InvalidBand: return "InvalidBand";
        case ParseFailureKind::InvalidSteps: return "InvalidSteps";
        case ParseFailureKind::OutcomeTokenNotFound: return "OutcomeTokenNotFound";
    }
    return "Unknown";
}

struct ParseFailure {
    ParseFailureKind kind;
    std::string detail;
};

using ParseResult = std::variant<StructuredResponse, ParseFailure>;

// ---------------------------------------------------------------------------
// Outcome token normalization

inline std::optional<OutcomeLabel> normalize_outcome_token(std::string_view surface) {
    auto s = trim(surface);
    while (!s.empty() && (s.front() == '"' || s.front() == '\'')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == '"' || s.back() == '\'')) s.remove_suffix(1);
    s = trim(s);
    if (s.size() == 1 && s[0] >= '0' && s[0] <= '3') return static_cast<OutcomeLabel>(s[0] - '0');

    static const std::regex word(R"((yes|no|inconclusive_(definition|evidence)))", std::regex::icase);
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(s.begin(), s.end(), m, word)) return std::nullopt;
    std::string lower;
    for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "no") return OutcomeLabel::No;
    if (lower == "yes") return OutcomeLabel::Yes;
    if (lower == "inconclusive_evidence") return OutcomeLabel::InconclusiveEvidence;
    return OutcomeLabel::InconclusiveDefinition;
}

// ---------------------------------------------------------------------------
// Verbalized confidence snapping

inline int snap_confidence(long long raw) {
    const long long c = std::clamp<long long>(raw, 0, 100);
    return static_cast<int>((c + 2) / 5 * 5);
}

// Lenient path for fractional values: half away from zero on the 5-grid.
inline int snap_confidence(double raw) {
    if (!std::isfinite(raw)) throw Error(ErrorCode::InvalidArgument, "non-finite confidence");
    const double c = std::clamp(raw, 0.0, 100.0);
    return static_cast<int>(std::round(c / 5.0) * 5.0);
}

// ---------------------------------------------------------------------------
// Retry contract

enum class RetryDecision : std::uint8_t { Accept, Retry, GiveUp };

inline RetryDecision decide_retry(int attempt, const std::optional<ParseFailure>& failure) {
    if (attempt < 1) throw Error(ErrorCode::InvalidArgument, "attempt must be >= 1");
    if (!failure) return RetryDecision::Accept;
    return attempt <= kMaxAttempts - 1 ? RetryDecision::Retry : RetryDecision::GiveUp;
}

// ---------------------------------------------------------------------------
// Position-aware JSON scanning over raw model text

struct TextSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
};

namespace detail {

inline std::size_t skip_ws(std::string_view t, std::size_t i) {
    while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
    return i;
}

// Returns one past the closing quote, or npos.
inline std::size_t skip_string(std::string_view t, std::size_t i) {
    if (i >= t.size() || t[i] != '"') return std::string_view::npos;
    for (++i; i < t.size(); ++i) {
        if (t[i] == '\\') { ++i; continue; }
        if (t[i] == '"') return i + 1;
    }
    return std::string_view::npos;
}

inline std::size_t skip_value(std::string_view t, std::size_t i) {
    i = skip_ws(t, i);
    if (i >= t.size()) return std::string_view::npos;
    const char c = t[i];
    if (c == '"') return skip_string(t, i);
    if (c == '{' || c == '[') {
        int depth = 0;
        for (; i < t.size(); ++i) {
            const char d = t[i];
            if (d == '"') {
                i = skip_string(t, i);
                if (i == std::string_view::npos) return i;
                --i;
            } else if (d == '{' || d == '[') {
                ++depth;
            } else if (d == '}' || d == ']') {
                if (--depth == 0) return i + 1;
            }
        }
        return std::string_view::npos;
    }
    while (i < t.size() && t[i] != ',' && t[i] != '}' && t[i] != ']' &&
           !std::isspace(static_cast<unsigned char>(t[i])))
        ++i;
    return i;
}

}  // namespace detail

// First balanced {...} in the text, honoring string literals.
inline std::optional<TextSpan> find_first_object(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') continue;
        const auto end = detail::skip_value(text, i);
        if (end != std::string_view::npos) return TextSpan{i, end};
    }
    return std::nullopt;
}

// Value span of `key` among the direct members of the object starting at obj.begin.
inline std::optional<TextSpan> find_member_value(std::string_view text, TextSpan obj, std::string_view key) {
    using namespace detail;
    std::size_t i = skip_ws(text, obj.begin);
    if (i >= obj.end || text[i] != '{') return std::nullopt;
    ++i;
    while (true) {
        i = skip_ws(text, i);
        if (i >= obj.end || text[i] == '}') return std::nullopt;
        const auto key_end = skip_string(text, i);
        if (key_end == std::string_view::npos) return std::nullopt;
        const auto this_key = text.substr(i + 1, key_end - i - 2);
        i = skip_ws(text, key_end);
        if (i >= obj.end || text[i] != ':') return std::nullopt;
        const auto vbeg = skip_ws(text, i + 1);
        const auto vend = skip_value(text, vbeg);
        if (vend == std::string_view::npos) return std::nullopt;
        if (this_key == key) return TextSpan{vbeg, vend};
        i = skip_ws(text, vend);
        if (i < obj.end && text[i] == ',') ++i;
    }
}

// Span of the object carrying the classification fields: either the top-level
// object or the first entry of its "classifications" map.
inline std::optional<TextSpan> find_classification_object(std::string_view text) {
    auto root = find_first_object(text);
    if (!root) return std::nullopt;
    if (find_member_value(text, *root, "outcome")) return root;
    auto cls = find_member_value(text, *root, "classifications");
    if (!cls || text[cls->begin] != '{') return root;
    std::size_t i = detail::skip_ws(text, cls->begin + 1);
    const auto key_end = detail::skip_string(text, i);
    if (key_end == std::string_view::npos) return root;
    i = detail::skip_ws(text, key_end);
    if (i >= text.size() || text[i] != ':') return root;
    const auto vbeg = detail::skip_ws(text, i + 1);
    const auto vend = detail::skip_value(text, vbeg);
    if (vend == std::string_view::npos || text[vbeg] != '{') return root;
    return TextSpan{vbeg, vend};
}

// ---------------------------------------------------------------------------
// Structured response parsing

namespace detail {

inline ParseFailure fail(ParseFailureKind k, std::string d) { return ParseFailure{k, std::move(d)}; }

inline const ordered_json* classification_node(const ordered_json& root) {
    if (!root.is_object()) return nullptr;
    if (root.contains("outcome")) return &root;
    auto it = root.find("classifications");
    if (it != root.end() && it->is_object() && !it->empty() && it->begin()->is_object())
        return &*it->begin();
    return &root;
}

}  // namespace detail

inline ParseResult parse_structured_response(std::string_view raw,
                                             std::optional<PromptMode> mode = std::nullopt) {
    using detail::fail;
    const auto span = find_first_object(raw);
    if (!span) return fail(ParseFailureKind::MalformedJson, "no balanced JSON object");

    ordered_json root;
    try {
        root = ordered_json::parse(raw.substr(span->begin, span->end - span->begin));
    } catch (const nlohmann::json::parse_error& e) {
        return fail(ParseFailureKind::MalformedJson, e.what());
    }
    const ordered_json* node = detail::classification_node(root);
    if (!node) return fail(ParseFailureKind::MalformedJson, "root is not an object");

    StructuredResponse out;

    // outcome
    auto oit = node->find("outcome");
    if (oit == node->end() || oit->is_null()) return fail(ParseFailureKind::MissingOutcome, "no outcome field");
    std::optional<OutcomeLabel> label;
    if (oit->is_number_integer()) label = outcome_from_int(oit->get<long long>());
    else if (oit->is_string()) label = normalize_outcome_token(oit->get<std::string>());
    if (!label) return fail(ParseFailureKind::MissingOutcome, "outcome does not match the schema: " + oit->dump());
    out.outcome = *label;

    // p_correct
    if (auto it = node->find("p_correct"); it != node->end() && !it->is_null()) {
        if (it->is_number_integer()) {
            out.p_correct = snap_confidence(it->get<long long>());
        } else if (it->is_number()) {
            out.p_correct = snap_confidence(it->get<double>());
        } else if (it->is_string()) {
            try {
                out.p_correct = snap_confidence(parse_double(trim(it->get<std::string>())));
            } catch (const Error&) {
                return fail(ParseFailureKind::MalformedJson, "p_correct is not numeric");
            }
        } else {
            return fail(ParseFailureKind::MalformedJson, "p_correct is not numeric");
        }
    }

    // band
    if (auto it = node->find("band"); it != node->end() && !it->is_null()) {
        if (!it->is_string()) return fail(ParseFailureKind::InvalidBand, "band is not a string");
        auto b = parse_band(it->get<std::string>());
        if (!b) return fail(ParseFailureKind::InvalidBand, "band not in {VL,L,M,H,VH}: " + it->get<std::string>());
        out.band = *b;
    }

    // reasoning_steps
    if (auto it = node->find("reasoning_steps"); it != node->end() && !it->is_null()) {
        if (!it->is_array()) return fail(ParseFailureKind::InvalidSteps, "reasoning_steps is not an array");
        int expected = 1;
        for (const auto& step : *it) {
            if (!step.is_object()) return fail(ParseFailureKind::InvalidSteps, "step is not an object");
            auto sn = step.find("step_number");
            auto ds = step.find("description");
            if (sn == step.end() || !sn->is_number_integer() || sn->get<long long>() != expected)
                return fail(ParseFailureKind::InvalidSteps, "step numbers must run 1..n");
            if (ds == step.end() || !ds->is_string())
                return fail(ParseFailureKind::InvalidSteps, "step description missing");
            out.reasoning_steps.push_back({expected, ds->get<std::string>()});
            ++expected;
        }
    }
    if (mode == PromptMode::ChainOfThought && out.reasoning_steps.size() != 3)
        return fail(ParseFailureKind::InvalidSteps, "chain-of-thought responses need exactly 3 steps");
    if (mode == PromptMode::Direct && !out.reasoning_steps.empty())
        return fail(ParseFailureKind::InvalidSteps, "direct responses carry no reasoning steps");

    return out;
}

// ---------------------------------------------------------------------------
// Token record normalization

// Clamps transport-noise positive logprobs, orders candidates, and makes sure
// the chosen token is listed.
inline void normalize_token_record(TokenRecord& rec) {
    auto clamp_lp = [](TokenCandidate& c) {
        if (!std::isfinite(c.logprob) && !(c.logprob < 0))
            throw Error(ErrorCode::InvalidArgument, "non-finite logprob for '" + c.surface + "'");
        if (c.logprob > kLogprobTolerance)
            throw Error(ErrorCode::InvalidArgument, "positive logprob for '" + c.surface + "'");
        if (c.logprob > 0) c.logprob = 0;
    };
    clamp_lp(rec.chosen);
    for (auto& c : rec.candidates) clamp_lp(c);
    std::stable_sort(rec.candidates.begin(), rec.candidates.end(),
                     [](const TokenCandidate& a, const TokenCandidate& b) { return a.logprob > b.logprob; });
    const bool present = std::any_of(rec.candidates.begin(), rec.candidates.end(),
                                     [&](const TokenCandidate& c) { return c.surface == rec.chosen.surface; });
    if (!present) {
        if (rec.candidates.size() >= kTopLogprobs) rec.candidates.resize(kTopLogprobs - 1);
        rec.candidates.push_back(rec.chosen);
        std::stable_sort(rec.candidates.begin(), rec.candidates.end(),
                         [](const TokenCandidate& a, const TokenCandidate& b) { return a.logprob > b.logprob; });
    }
    if (rec.candidates.size() > kTopLogprobs) rec.candidates.resize(kTopLogprobs);
}

inline void validate_trace(const ResponseTrace& t) {
    if (t.item_id.empty()) throw Error(ErrorCode::InvalidArgument, "trace without item_id");
    if (t.attempt < 1 || t.attempt > kMaxAttempts)
        throw Error(ErrorCode::InvalidArgument, "attempt out of range for " + t.item_id);
    if (t.logprobs_available) {
        const auto n = std::count_if(t.tokens.begin(), t.tokens.end(),
                                     [](const TokenRecord& r) { return r.span == Span::Outcome; });
        if (n != 1)
            throw Error(ErrorCode::InvalidArgument,
                        "trace " + t.item_id + " must carry exactly one outcome token, has " + std::to_string(n));
    }
}

// ---------------------------------------------------------------------------
// JSONL (de)serialization

inline ordered_json to_json(const TokenCandidate& c) {
    ordered_json j;
    j["surface"] = c.surface;
    j["logprob"] = c.logprob;
    return j;
}

inline TokenCandidate candidate_from_json(const ordered_json& j) {
    return TokenCandidate{j.at("surface").get<std::string>(), j.at("logprob").get<double>()};
}

inline ordered_json to_json(const StructuredResponse& s) {
    ordered_json j;
    j["outcome"] = to_int(s.outcome);
    ordered_json steps = ordered_json::array();
    for (const auto& st : s.reasoning_steps) {
        ordered_json o;
        o["step_number"] = st.step_number;
        o["description"] = st.description;
        steps.push_back(std::move(o));
    }
    j["reasoning_steps"] = std::move(steps);
    j["p_correct"] = s.p_correct ? ordered_json(*s.p_correct) : ordered_json(nullptr);
    j["band"] = s.band ? ordered_json(std::string(to_string(*s.band))) : ordered_json(nullptr);
    return j;
}

inline ordered_json to_json(const ResponseTrace& t) {
    ordered_json j;
    j["item_id"] = t.item_id;
    j["attempt"] = t.attempt;
    if (!t.logprobs_available) j["logprobs_available"] = false;
    j["structured"] = to_json(t.structured);
    ordered_json toks = ordered_json::array();
    for (const auto& r : t.tokens) {
        ordered_json o;
        o["span"] = r.span == Span::Outcome ? "outcome" : "reasoning";
        o["chosen"] = to_json(r.chosen);
        ordered_json cands = ordered_json::array();
        for (const auto& c : r.candidates) cands.push_back(to_json(c));
        o["candidates"] = std::move(cands);
        toks.push_back(std::move(o));
    }
    j["tokens"] = std::move(toks);
    return j;
}

inline ResponseTrace trace_from_json(const ordered_json& j) {
    ResponseTrace t;
    t.item_id = j.at("item_id").get<std::string>();
    t.attempt = j.value("attempt", 1);
    t.logprobs_available = j.value("logprobs_available", true);

    const auto& s = j.at("structured");
    const auto& o = s.at("outcome");
    std::optional<OutcomeLabel> label;
    if (o.is_number_integer()) label = outcome_from_int(o.get<long long>());
    else if (o.is_string()) label = normalize_outcome_token(o.get<std::string>());
    if (!label) throw Error(ErrorCode::InvalidArgument, "trace " + t.item_id + ": invalid outcome");
    t.structured.outcome = *label;
    if (auto it = s.find("reasoning_steps"); it != s.end() && it->is_array())
        for (const auto& st : *it)
            t.structured.reasoning_steps.push_back(
                {st.at("step_number").get<int>(), st.at("description").get<std::string>()});
    if (auto it = s.find("p_correct"); it != s.end() && !it->is_null())
        t.structured.p_correct = snap_confidence(it->get<long long>());
    if (auto it = s.find("band"); it != s.end() && !it->is_null()) {
        auto b = parse_band(it->get<std::string>());
        if (!b) throw Error(ErrorCode::InvalidArgument, "trace " + t.item_id + ": invalid band");
        t.structured.band = *b;
    }

    for (const auto& r : j.at("tokens")) {
        TokenRecord rec;
        const auto span = r.at("span").get<std::string>();
        if (span == "outcome") rec.span = Span::Outcome;
        else if (span == "reasoning") rec.span = Span::Reasoning;
        else throw Error(ErrorCode::InvalidArgument, "unknown span '" + span + "'");
        rec.chosen = candidate_from_json(r.at("chosen"));
        for (const auto& c : r.at("candidates")) rec.candidates.push_back(candidate_from_json(c));
        normalize_token_record(rec);
        t.tokens.push_back(std::move(rec));
    }
    validate_trace(t);
    return t;
}

inline std::string to_jsonl(const std::vector<ResponseTrace>& traces) {
    std::string out;
    for (const auto& t : traces) {
        out += to_json(t).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<ResponseTrace> traces_from_jsonl(std::string_view text) {
    std::vector<ResponseTrace> out;
    std::size_t line_no = 0;
    for (const auto& line : split_lines(text)) {
        ++line_no;
        try {
            out.push_back(trace_from_json(ordered_json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::InvalidArgument,
                        "trace line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace lppgate
