#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "easter/ctc.hpp"

namespace easter {

/// Throws DataError on malformed UTF-8.
std::u32string utf8_decode(std::string_view text);
std::string utf8_encode(std::u32string_view text);

/// Ordered symbol set. Ids are positions; the CTC blank takes id size().
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::u32string symbols);

    /// The conventional 79-symbol IAM line alphabet.
    static Vocabulary iam();
    /// UTF-8 file, one symbol per line, order significant.
    static Vocabulary load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const { return symbols_.size(); }
    int blank() const { return static_cast<int>(symbols_.size()); }
    /// Symbols plus the blank.
    int num_classes() const { return static_cast<int>(symbols_.size()) + 1; }
    const std::u32string& symbols() const { return symbols_; }

    bool contains(char32_t c) const { return index_.count(c) != 0; }
    /// Throws DataError naming the first out-of-vocabulary symbol.
    Label encode(std::u32string_view text) const;
    Label encode_utf8(std::string_view text) const;
    std::u32string decode(const Label& ids) const;
    std::string decode_utf8(const Label& ids) const;

    /// One UTF-8 string per symbol.
    std::vector<std::string> to_strings() const;
    static Vocabulary from_strings(const std::vector<std::string>& symbols);

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.symbols_ == b.symbols_; }

private:
    std::u32string symbols_;
    std::unordered_map<char32_t, int> index_;
};

}  // namespace easter
