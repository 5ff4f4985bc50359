#include "easter/vocabulary.hpp"

#include <fstream>

#include "easter/error.hpp"

namespace easter {

std::u32string utf8_decode(std::string_view text) {
    std::u32string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto lead = static_cast<unsigned char>(text[i]);
        std::size_t extra = 0;
        char32_t cp = 0;
        if (lead < 0x80) {
            cp = lead;
        } else if ((lead & 0xE0) == 0xC0) {
            cp = lead & 0x1F;
            extra = 1;
        } else if ((lead & 0xF0) == 0xE0) {
            cp = lead & 0x0F;
            extra = 2;
        } else if ((lead & 0xF8) == 0xF0) {
            cp = lead & 0x07;
            extra = 3;
        } else {
            throw DataError("invalid UTF-8 lead byte at offset " + std::to_string(i));
        }
        for (std::size_t k = 1; k <= extra; ++k) {
            if (i + k >= text.size()) throw DataError("truncated UTF-8 sequence at offset " + std::to_string(i));
            const auto cont = static_cast<unsigned char>(text[i + k]);
            if ((cont & 0xC0) != 0x80) throw DataError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
            cp = (cp << 6) | (cont & 0x3F);
        }
        out.push_back(cp);
        i += extra + 1;
    }
    return out;
}

std::string utf8_encode(std::u32string_view text) {
    std::string out;
    for (char32_t cp : text) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

Vocabulary::Vocabulary(std::u32string symbols) : symbols_(std::move(symbols)) {
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
        if (!index_.emplace(symbols_[i], static_cast<int>(i)).second) {
            throw DataError("vocabulary: duplicate symbol '" + utf8_encode(std::u32string(1, symbols_[i])) + "'");
        }
    }
}

Vocabulary Vocabulary::iam() {
    return Vocabulary(U" !\"#&'()*+,-./0123456789:;?ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz");
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary " + path.string());
    std::u32string symbols;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    for (const auto& raw : lines) {
        ++line_no;
        std::string l = raw;
        if (!l.empty() && l.back() == '\r') l.pop_back();
        if (l.empty()) {
            if (line_no == lines.size()) break;
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": empty vocabulary line");
        }
        const auto cps = utf8_decode(l);
        if (cps.size() != 1) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected exactly one symbol per line");
        }
        symbols.push_back(cps[0]);
    }
    return Vocabulary(std::move(symbols));
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary " + path.string());
    for (const auto& s : to_strings()) out << s << '\n';
}

Label Vocabulary::encode(std::u32string_view text) const {
    Label ids;
    ids.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        auto it = index_.find(text[i]);
        if (it == index_.end()) {
            throw DataError("symbol '" + utf8_encode(std::u32string(1, text[i])) + "' at position " +
                            std::to_string(i) + " is not in the vocabulary");
        }
        ids.push_back(it->second);
    }
    return ids;
}

Label Vocabulary::encode_utf8(std::string_view text) const { return encode(utf8_decode(text)); }

std::u32string Vocabulary::decode(const Label& ids) const {
    std::u32string out;
    out.reserve(ids.size());
    for (auto id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size()) {
            throw ContractViolation("vocabulary: id " + std::to_string(id) + " out of range");
        }
        out.push_back(symbols_[static_cast<std::size_t>(id)]);
    }
    return out;
}

std::string Vocabulary::decode_utf8(const Label& ids) const { return utf8_encode(decode(ids)); }

std::vector<std::string> Vocabulary::to_strings() const {
    std::vector<std::string> out;
    for (char32_t c : symbols_) out.push_back(utf8_encode(std::u32string(1, c)));
    return out;
}

Vocabulary Vocabulary::from_strings(const std::vector<std::string>& symbols) {
    std::u32string cps;
    for (const auto& s : symbols) {
        const auto d = utf8_decode(s);
        if (d.size() != 1) throw DataError("vocabulary entry '" + s + "' is not a single symbol");
        cps.push_back(d[0]);
    }
    return Vocabulary(std::move(cps));
}

}  // namespace easter
