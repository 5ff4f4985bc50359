#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace easter {

struct EditCounts {
    std::size_t distance = 0;
    std::size_t substitutions = 0;
    std::size_t insertions = 0;
    std::size_t deletions = 0;

    friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

/// Unit-cost edit distance with an operation breakdown. The backtrace
/// prefers substitution, then deletion, then insertion.
EditCounts levenshtein(std::u32string_view ref, std::u32string_view hyp);

/// Corpus totals; CER is micro-averaged over reference symbols.
struct CerReport {
    std::size_t substitutions = 0;
    std::size_t insertions = 0;
    std::size_t deletions = 0;
    std::size_t reference_chars = 0;
    std::size_t pairs = 0;

    void add(const EditCounts& counts, std::size_t reference_length);
    void merge(const CerReport& other);
    std::size_t errors() const { return substitutions + insertions + deletions; }
    /// Percent; absent when there are no reference symbols.
    std::optional<double> cer() const;

    friend bool operator==(const CerReport&, const CerReport&) = default;
};

using TextPair = std::pair<std::u32string, std::u32string>;  // (reference, hypothesis)

/// Throws ContractViolation when the pairs contain no reference symbols.
CerReport corpus_cer(const std::vector<TextPair>& pairs);

struct LengthBucket {
    std::size_t lo = 0;
    std::size_t hi = 0;  // inclusive; the last bucket is open-ended
    std::string label;
    CerReport report;
};

/// Reference-length buckets 0-40, 41-45, 46-50, 51-55, 56-60 and 61-100;
/// lengths past 100 land in the last bucket.
std::vector<LengthBucket> empty_buckets();
std::size_t bucket_index(std::size_t reference_length);
std::vector<LengthBucket> bucketed_cer(const std::vector<TextPair>& pairs);

nlohmann::json to_json(const CerReport& report);
nlohmann::json to_json(const std::vector<LengthBucket>& buckets);
/// Aligned plain-text table. Buckets are optional.
std::string format_table(const CerReport& total, const std::vector<LengthBucket>* buckets = nullptr);
/// Bar chart of per-bucket CER.
std::string bucket_chart_svg(const std::vector<LengthBucket>& buckets);

}  // namespace easter
