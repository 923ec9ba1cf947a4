#pragma once

// Provider-agnostic inference: prompt rendering, fixed decoding settings,
// token/JSON-field span alignment, and the malformed-output retry loop.

#include "lppgate/common.hpp"
#include "lppgate/schema.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace lppgate {

struct DecodingConfig {
    double temperature = 0.0;
    double top_p = 1.0;
    int n = 1;
    int max_output_tokens = 8096;
    int top_logprobs = static_cast<int>(kTopLogprobs);
    bool non_paper = false;  // must be set to send anything else

    bool is_reference() const {
        return temperature == 0.0 && top_p == 1.0 && n == 1 && max_output_tokens == 8096 &&
               top_logprobs == static_cast<int>(kTopLogprobs);
    }

    void validate() const {
        if (!is_reference() && !non_paper)
            throw Error(ErrorCode::NonPaperDecoding, "decoding differs from the reference settings without override");
        if (n != 1) throw Error(ErrorCode::InvalidArgument, "only n = 1 is supported");
        if (top_logprobs < 0 || top_logprobs > static_cast<int>(kTopLogprobs))
            throw Error(ErrorCode::InvalidArgument, "top_logprobs must be in [0,20]");
    }
};

inline nlohmann::ordered_json to_json(const DecodingConfig& d) {
    nlohmann::ordered_json j;
    j["temperature"] = d.temperature;
    j["top_p"] = d.top_p;
    j["n"] = d.n;
    j["max_output_tokens"] = d.max_output_tokens;
    j["top_logprobs"] = d.top_logprobs;
    j["non_paper"] = d.non_paper;
    return j;
}

// ---------------------------------------------------------------------------
// Prompt templates

enum class Modality : std::uint8_t { Text, Multimodal };

struct PromptTemplate {
    std::string id;
    Modality modality = Modality::Text;
    PromptMode mode = PromptMode::Direct;
    std::string system;
    std::string user;

    std::vector<std::string> required_placeholders() const {
        if (modality == Modality::Text) return {"CONCEPT_DEFINITION", "TEXT"};
        return {"CONCEPT_DEFINITION", "TEXT", "THUMBNAIL", "TRANSCRIPT", "VIDEO\\FRAMES"};
    }
};

namespace templates {

inline constexpr std::string_view kSystemDirect =
    "# ROLE AND GOAL\n"
    "You are a careful content reviewer. Decide whether the content matches the concept below.\n"
    "\n"
    "# CONCEPT\n"
    "{{CONCEPT_DEFINITION}}\n"
    "\n"
    "# OUTPUT FORMAT\n"
    "Reply with a single JSON object and nothing else:\n"
    "{\"outcome\": <0|1|2|3>, \"p_correct\": <integer 0-100, multiple of 5>, \"band\": \"<VL|L|M|H|VH>\"}\n"
    "outcome: 0 = no, 1 = yes, 2 = inconclusive_evidence (the content is too ambiguous),\n"
    "3 = inconclusive_definition (the concept definition does not settle the case).\n"
    "p_correct: your probability, in percent, that the outcome is correct. band: the same confidence as a band.\n";

inline constexpr std::string_view kSystemCot =
    "# ROLE AND GOAL\n"
    "You are a careful content reviewer. Decide whether the content matches the concept below.\n"
    "\n"
    "# CONCEPT\n"
    "{{CONCEPT_DEFINITION}}\n"
    "\n"
    "# REASONING FRAMEWORK\n"
    "Think in exactly three steps: (1) describe the relevant content, (2) compare it with the concept,\n"
    "(3) state the decision and what limits your certainty.\n"
    "\n"
    "# OUTPUT FORMAT\n"
    "Reply with a single JSON object and nothing else:\n"
    "{\"reasoning_steps\": [{\"step_number\": 1, \"description\": \"...\"}, {\"step_number\": 2, \"description\": \"...\"},\n"
    " {\"step_number\": 3, \"description\": \"...\"}],\n"
    " \"outcome\": <0|1|2|3>, \"p_correct\": <integer 0-100, multiple of 5>, \"band\": \"<VL|L|M|H|VH>\"}\n"
    "outcome: 0 = no, 1 = yes, 2 = inconclusive_evidence (the content is too ambiguous),\n"
    "3 = inconclusive_definition (the concept definition does not settle the case).\n"
    "p_correct: your probability, in percent, that the outcome is correct. band: the same confidence as a band.\n";

inline constexpr std::string_view kUserText =
    "Please classify the following content:\n"
    "--- CONTENT START ---\n"
    "{{TEXT}}\n"
    "--- CONTENT END ---";

inline constexpr std::string_view kUserMultimodal =
    "Analyze the following multimodal content.\n"
    "\n"
    "--- START OF MULTIMODAL CONTENT ---\n"
    "<VIDEO\\FRAMES> {{VIDEO\\FRAMES}} </VIDEO\\FRAMES>\n"
    "<THUMBNAIL> {{THUMBNAIL}} </THUMBNAIL>\n"
    "<TRANSCRIPT> {{TRANSCRIPT}} </TRANSCRIPT>\n"
    "<CONTENT_TEXT> {{TEXT}} </CONTENT_TEXT>\n"
    "--- END OF MULTIMODAL CONTENT ---";

}  // namespace templates

inline const std::vector<std::string>& template_ids() {
    static const std::vector<std::string> ids{"text-direct", "text-cot", "multimodal-direct", "multimodal-cot"};
    return ids;
}

inline PromptTemplate builtin_template(std::string_view id) {
    PromptTemplate t;
    t.id = std::string(id);
    if (id == "text-direct" || id == "text-cot") t.modality = Modality::Text;
    else if (id == "multimodal-direct" || id == "multimodal-cot") t.modality = Modality::Multimodal;
    else throw Error(ErrorCode::InvalidArgument, "unknown template '" + std::string(id) + "'");
    t.mode = id.ends_with("-cot") ? PromptMode::ChainOfThought : PromptMode::Direct;
    t.system = std::string(t.mode == PromptMode::ChainOfThought ? templates::kSystemCot : templates::kSystemDirect);
    t.user = std::string(t.modality == Modality::Text ? templates::kUserText : templates::kUserMultimodal);
    return t;
}

// Loads system-{direct,cot}.txt and user-{text,multimodal}.txt from a directory.
inline PromptTemplate load_template(std::string_view id, const std::string& dir) {
    auto t = builtin_template(id);
    t.system = read_file(dir + (t.mode == PromptMode::ChainOfThought ? "/system-cot.txt" : "/system-direct.txt"));
    t.user = read_file(dir + (t.modality == Modality::Text ? "/user-text.txt" : "/user-multimodal.txt"));
    return t;
}

using PromptFields = std::map<std::string, std::string>;

// Single pass: substituted values are never re-scanned for placeholders.
inline std::string substitute(std::string_view body, const PromptFields& fields) {
    std::string out;
    std::size_t i = 0;
    while (i < body.size()) {
        const auto open = body.find("{{", i);
        if (open == std::string_view::npos) break;
        const auto close = body.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        const std::string name(body.substr(open + 2, close - open - 2));
        auto it = fields.find(name);
        if (it == fields.end()) throw Error(ErrorCode::MissingPlaceholder, "no value for {{" + name + "}}");
        out.append(body.substr(i, open - i));
        out += it->second;
        i = close + 2;
    }
    out.append(body.substr(i));
    return out;
}

struct RenderedPrompt {
    std::string system;
    std::string user;
};

inline RenderedPrompt render_prompt(const PromptTemplate& t, const PromptFields& fields) {
    for (const auto& p : t.required_placeholders())
        if (!fields.contains(p)) throw Error(ErrorCode::MissingPlaceholder, "template " + t.id + " needs {{" + p + "}}");
    return RenderedPrompt{substitute(t.system, fields), substitute(t.user, fields)};
}

// ---------------------------------------------------------------------------
// Providers

struct RawToken {
    std::string surface;
    double logprob = 0.0;
    std::vector<TokenCandidate> top;
};

struct ProviderResponse {
    std::string text;
    std::vector<RawToken> tokens;
    bool logprobs_available = true;
};

struct ChatRequest {
    std::string item_id;
    RenderedPrompt prompt;
    DecodingConfig decoding;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string name() const = 0;
    // Throws Error{Transport} for retryable failures, Error{AuthFailure} otherwise.
    virtual ProviderResponse complete(const ChatRequest& req) = 0;
};

// Deterministic tokenizer for fixtures: digits alone, punctuation alone,
// everything else as (leading spaces + word) runs. Concatenation is lossless.
inline std::vector<std::string> fixture_tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    auto is_word = [](char c) {
        return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || (static_cast<unsigned char>(c) & 0x80);
    };
    while (i < text.size()) {
        std::size_t j = i;
        while (j < text.size() && text[j] == ' ') ++j;
        if (j < text.size() && is_word(text[j])) {
            while (j < text.size() && is_word(text[j])) ++j;
        } else if (j == i) {
            j = i + 1;
        }
        out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

// Synthesizes logprobs for a fixture response: digits get a spread over the
// other digits, everything else is near-certain.
inline ProviderResponse fixture_response(std::string text, double digit_logprob = std::log(0.9)) {
    ProviderResponse r;
    r.text = std::move(text);
    for (auto& tok : fixture_tokenize(r.text)) {
        RawToken rt;
        rt.surface = tok;
        const bool digit = tok.size() == 1 && std::isdigit(static_cast<unsigned char>(tok[0]));
        rt.logprob = digit ? digit_logprob : std::log(0.999);
        rt.top.push_back({tok, rt.logprob});
        if (digit) {
            const double rest = std::log((1.0 - std::exp(digit_logprob)) / 3.0);
            for (char d = '0'; d <= '3'; ++d)
                if (d != tok[0]) rt.top.push_back({std::string(1, d), rest});
        }
        r.tokens.push_back(std::move(rt));
    }
    return r;
}

// Fixture-backed provider. Each item has a scripted sequence of responses;
// the last one repeats once the script runs out.
class StubProvider : public Provider {
public:
    StubProvider() = default;

    void script(const std::string& item_id, std::vector<ProviderResponse> responses) {
        std::lock_guard lock(mu_);
        scripts_[item_id] = std::move(responses);
        calls_[item_id] = 0;
    }

    void set_default(ProviderResponse r) { default_ = std::move(r); }

    std::string name() const override { return "stub"; }

    ProviderResponse complete(const ChatRequest& req) override {
        std::lock_guard lock(mu_);
        auto it = scripts_.find(req.item_id);
        if (it == scripts_.end() || it->second.empty()) {
            if (default_) return *default_;
            throw Error(ErrorCode::MissingInput, "stub has no fixture for " + req.item_id);
        }
        auto& n = calls_[req.item_id];
        const auto idx = std::min(n, it->second.size() - 1);
        ++n;
        return it->second[idx];
    }

    std::size_t calls(const std::string& item_id) const {
        std::lock_guard lock(mu_);
        auto it = calls_.find(item_id);
        return it == calls_.end() ? 0 : it->second;
    }

    // Fixture JSON: {"items": {"<id>": [<response>...]}, "default": <response>?}
    // where a response is either {"text": "..."} (tokens synthesized) or
    // {"text": "...", "tokens": [{"surface","logprob","top":[{"surface","logprob"}]}]}
    // and may set "logprobs": false.
    static std::unique_ptr<StubProvider> from_json(const nlohmann::json& j) {
        auto p = std::make_unique<StubProvider>();
        auto parse_one = [](const nlohmann::json& r) {
            ProviderResponse out;
            if (r.contains("tokens")) {
                out.text = r.at("text").get<std::string>();
                for (const auto& t : r.at("tokens")) {
                    RawToken rt{t.at("surface").get<std::string>(), t.at("logprob").get<double>(), {}};
                    for (const auto& c : t.value("top", nlohmann::json::array()))
                        rt.top.push_back({c.at("surface").get<std::string>(), c.at("logprob").get<double>()});
                    out.tokens.push_back(std::move(rt));
                }
            } else {
                out = fixture_response(r.at("text").get<std::string>());
            }
            if (!r.value("logprobs", true)) {
                out.logprobs_available = false;
                out.tokens.clear();
            }
            return out;
        };
        if (j.contains("items"))
            for (const auto& [id, seq] : j.at("items").items()) {
                std::vector<ProviderResponse> rs;
                for (const auto& r : seq) rs.push_back(parse_one(r));
                p->script(id, std::move(rs));
            }
        if (j.contains("default")) p->set_default(parse_one(j.at("default")));
        return p;
    }

private:
    mutable std::mutex mu_;
    std::map<std::string, std::vector<ProviderResponse>> scripts_;
    std::map<std::string, std::size_t> calls_;
    std::optional<ProviderResponse> default_;
};

// ---------------------------------------------------------------------------
// Span segmentation

namespace detail {

// Character offsets for each token. Uses the concatenation when it
// reproduces the text; otherwise aligns each surface by forward search.
inline std::vector<std::optional<TextSpan>> token_offsets(std::string_view text, const std::vector<RawToken>& toks) {
    std::vector<std::optional<TextSpan>> out(toks.size());
    std::string joined;
    for (const auto& t : toks) joined += t.surface;
    std::size_t pos = 0;
    if (joined == text) {
        for (std::size_t i = 0; i < toks.size(); ++i) {
            out[i] = TextSpan{pos, pos + toks[i].surface.size()};
            pos += toks[i].surface.size();
        }
        return out;
    }
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (toks[i].surface.empty()) continue;
        const auto at = text.find(toks[i].surface, pos);
        if (at == std::string_view::npos) continue;
        out[i] = TextSpan{at, at + toks[i].surface.size()};
        pos = at + toks[i].surface.size();
    }
    return out;
}

inline bool overlaps(TextSpan a, TextSpan b) { return a.begin < b.end && b.begin < a.end; }

// Strips the quotes from a string value span.
inline TextSpan value_content(std::string_view text, TextSpan v) {
    if (v.end - v.begin >= 2 && text[v.begin] == '"') return TextSpan{v.begin + 1, v.end - 1};
    return v;
}

// Content spans of every reasoning_steps[*].description string.
inline std::vector<TextSpan> description_spans(std::string_view text, TextSpan array) {
    std::vector<TextSpan> out;
    if (text[array.begin] != '[') return out;
    std::size_t i = skip_ws(text, array.begin + 1);
    while (i < array.end && text[i] != ']') {
        const auto end = skip_value(text, i);
        if (end == std::string_view::npos) break;
        if (text[i] == '{')
            if (auto d = find_member_value(text, TextSpan{i, end}, "description")) out.push_back(value_content(text, *d));
        i = skip_ws(text, end);
        if (i < array.end && text[i] == ',') i = skip_ws(text, i + 1);
    }
    return out;
}

}  // namespace detail

// Tags the first token overlapping the outcome value as Outcome and tokens
// overlapping reasoning descriptions as Reasoning; all others are dropped.
// Fails with OutcomeTokenNotFound when no token covers the outcome value.
inline std::variant<std::vector<TokenRecord>, ParseFailure> segment_spans(std::string_view text,
                                                                          const std::vector<RawToken>& toks) {
    const auto obj = find_classification_object(text);
    if (!obj) return ParseFailure{ParseFailureKind::MalformedJson, "no JSON object to align"};
    const auto outcome_v = find_member_value(text, *obj, "outcome");
    if (!outcome_v) return ParseFailure{ParseFailureKind::MissingOutcome, "no outcome field to align"};
    const auto outcome_span = detail::value_content(text, *outcome_v);
    std::vector<TextSpan> reasoning;
    if (auto r = find_member_value(text, *obj, "reasoning_steps")) reasoning = detail::description_spans(text, *r);

    const auto offsets = detail::token_offsets(text, toks);
    std::vector<TokenRecord> out;
    bool have_outcome = false;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (!offsets[i]) continue;
        std::optional<Span> tag;
        if (!have_outcome && detail::overlaps(*offsets[i], outcome_span)) {
            // Skip pure whitespace tokens that merely touch the value.
            if (trim(toks[i].surface).empty()) continue;
            tag = Span::Outcome;
            have_outcome = true;
        } else {
            for (const auto& r : reasoning)
                if (detail::overlaps(*offsets[i], r)) {
                    tag = Span::Reasoning;
                    break;
                }
        }
        if (!tag) continue;
        TokenRecord rec;
        rec.span = *tag;
        rec.chosen = TokenCandidate{toks[i].surface, toks[i].logprob};
        rec.candidates = toks[i].top;
        normalize_token_record(rec);
        out.push_back(std::move(rec));
    }
    if (!have_outcome) return ParseFailure{ParseFailureKind::OutcomeTokenNotFound, "no token covers the outcome value"};
    return out;
}

// ---------------------------------------------------------------------------
// Retry loop and batch runner

struct GatewayConfig {
    DecodingConfig decoding;
    int transport_retries = 3;
    std::chrono::milliseconds backoff_base{500};
    std::chrono::milliseconds backoff_cap{8000};
    unsigned concurrency = 4;
};

struct AttemptLog {
    int attempt = 0;
    std::optional<ParseFailure> failure;
};

struct ItemResult {
    std::string item_id;
    std::optional<ResponseTrace> trace;  // empty on give-up
    std::vector<AttemptLog> attempts;
    bool gray_box_unavailable = false;
};

// Transport failures are retried with exponential backoff, separately from
// the malformed-output budget.
inline ProviderResponse dispatch(Provider& p, const ChatRequest& req, const GatewayConfig& cfg) {
    req.decoding.validate();
    for (int t = 0;; ++t) {
        try {
            return p.complete(req);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Transport || t >= cfg.transport_retries) throw;
            const auto wait = std::min(cfg.backoff_cap, cfg.backoff_base * (1 << t));
            std::this_thread::sleep_for(wait);
        }
    }
}

inline ItemResult run_item(Provider& p, const ChatRequest& req, PromptMode mode, const GatewayConfig& cfg) {
    ItemResult r;
    r.item_id = req.item_id;
    for (int attempt = 1;; ++attempt) {
        const auto resp = dispatch(p, req, cfg);
        std::optional<ParseFailure> failure;
        ResponseTrace trace;
        trace.item_id = req.item_id;
        trace.attempt = attempt;
        trace.logprobs_available = resp.logprobs_available;
        auto parsed = parse_structured_response(resp.text, mode);
        if (auto* f = std::get_if<ParseFailure>(&parsed)) {
            failure = *f;
        } else {
            trace.structured = std::get<StructuredResponse>(parsed);
            if (resp.logprobs_available) {
                auto seg = segment_spans(resp.text, resp.tokens);
                if (auto* sf = std::get_if<ParseFailure>(&seg)) failure = *sf;
                else trace.tokens = std::move(std::get<std::vector<TokenRecord>>(seg));
            }
        }
        r.attempts.push_back({attempt, failure});
        switch (decide_retry(attempt, failure)) {
            case RetryDecision::Accept:
                r.gray_box_unavailable = !resp.logprobs_available;
                r.trace = std::move(trace);
                return r;
            case RetryDecision::Retry: continue;
            case RetryDecision::GiveUp: return r;
        }
    }
}

struct GatewayItem {
    std::string item_id;
    PromptFields fields;
};

struct BatchResult {
    std::vector<ResponseTrace> traces;  // sorted by item_id
    std::vector<ItemResult> items;      // sorted by item_id
    nlohmann::ordered_json manifest;
};

inline BatchResult run_batch(Provider& p, const PromptTemplate& tpl, const std::vector<GatewayItem>& items,
                             const GatewayConfig& cfg) {
    cfg.decoding.validate();
    std::vector<ChatRequest> reqs;
    reqs.reserve(items.size());
    for (const auto& it : items) reqs.push_back(ChatRequest{it.item_id, render_prompt(tpl, it.fields), cfg.decoding});

    std::vector<ItemResult> results(reqs.size());
    std::vector<std::exception_ptr> errors(reqs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < reqs.size();) {
            try {
                results[i] = run_item(p, reqs[i], tpl.mode, cfg);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned width = std::max(1u, std::min<unsigned>(cfg.concurrency, static_cast<unsigned>(reqs.size())));
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < width; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::sort(results.begin(), results.end(), [](const ItemResult& a, const ItemResult& b) { return a.item_id < b.item_id; });
    BatchResult out;
    nlohmann::ordered_json give_ups = nlohmann::ordered_json::array();
    nlohmann::ordered_json gray = nlohmann::ordered_json::array();
    std::size_t retried = 0;
    for (auto& r : results) {
        if (r.attempts.size() > 1) ++retried;
        if (r.trace) {
            out.traces.push_back(*r.trace);
            if (r.gray_box_unavailable) gray.push_back(r.item_id);
        } else {
            nlohmann::ordered_json g;
            g["item_id"] = r.item_id;
            g["attempts"] = r.attempts.size();
            const auto& last = r.attempts.back().failure;
            g["last_failure"] = last ? std::string(to_string(last->kind)) : std::string("none");
            g["detail"] = last ? last->detail : std::string();
            give_ups.push_back(std::move(g));
        }
    }
    out.items = std::move(results);

    auto& m = out.manifest;
    m["provider"] = p.name();
    m["template"] = tpl.id;
    m["template_hash"] = sha256_hex(tpl.system + '\x1f' + tpl.user);
    m["decoding"] = to_json(cfg.decoding);
    m["items"] = items.size();
    m["accepted"] = out.traces.size();
    m["retried_items"] = retried;
    m["give_ups"] = std::move(give_ups);
    m["gray_box_unavailable"] = std::move(gray);
    return out;
}

}  // namespace lppgate
