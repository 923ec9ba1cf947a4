#pragma once

// Shared plumbing: error type, number formatting, hashing, small CSV helpers.

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace lppgate {

inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr double kEpsilon = 1e-12;

enum class ErrorCode {
    InvalidArgument,
    Io,
    ParseFailure,
    EmptyCandidates,
    NoLabelMass,
    RatioUnreachable,
    InsufficientNegatives,
    SingularSystem,
    NonConvergence,
    DegenerateFold,
    FeatureMismatch,
    LengthMismatch,
    MissingFeature,
    MissingPlaceholder,
    Transport,
    AuthFailure,
    ProviderNoLogprobs,
    OutcomeTokenNotFound,
    NonPaperDecoding,
    MissingInput,
};

inline std::string_view to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
        case ErrorCode::ParseFailure: return "ParseFailure";
        case ErrorCode::EmptyCandidates: return "EmptyCandidates";
        case ErrorCode::NoLabelMass: return "NoLabelMass";
        case ErrorCode::RatioUnreachable: return "RatioUnreachable";
        case ErrorCode::InsufficientNegatives: return "InsufficientNegatives";
        case ErrorCode::SingularSystem: return "SingularSystem";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::DegenerateFold: return "DegenerateFold";
        case ErrorCode::FeatureMismatch: return "FeatureMismatch";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::MissingFeature: return "MissingFeature";
        case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
        case ErrorCode::Transport: return "Transport";
        case ErrorCode::AuthFailure: return "AuthFailure";
        case ErrorCode::ProviderNoLogprobs: return "ProviderNoLogprobs";
        case ErrorCode::OutcomeTokenNotFound: return "OutcomeTokenNotFound";
        case ErrorCode::NonPaperDecoding: return "NonPaperDecoding";
        case ErrorCode::MissingInput: return "MissingInput";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
    if (v == 0.0) return "0";  // folds -0
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw Error(ErrorCode::InvalidArgument, "cannot format double");
    return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw Error(ErrorCode::InvalidArgument, "not a number: '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw Error(ErrorCode::InvalidArgument, "not an integer: '" + std::string(s) + "'");
    return v;
}

inline std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::Io, "sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingInput, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

inline std::string_view trim(std::string_view s) {
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!trim(line).empty()) lines.emplace_back(line);
        start = end + 1;
    }
    return lines;
}

// Plain comma split; the CSVs written here never quote fields.
inline std::vector<std::string> split_csv_row(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto end = line.find(',', start);
        if (end == std::string_view::npos) {
            out.emplace_back(trim(line.substr(start)));
            break;
        }
        out.emplace_back(trim(line.substr(start, end - start)));
        start = end + 1;
    }
    return out;
}

}  // namespace lppgate
