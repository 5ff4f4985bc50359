#include "easter/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "easter/error.hpp"

namespace easter {

EditCounts levenshtein(std::u32string_view ref, std::u32string_view hyp) {
    const std::size_t n = ref.size();
    const std::size_t m = hyp.size();
    const std::size_t cols = m + 1;
    std::vector<std::size_t> d((n + 1) * cols);
    for (std::size_t i = 0; i <= n; ++i) d[i * cols] = i;
    for (std::size_t j = 0; j <= m; ++j) d[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t diag = d[(i - 1) * cols + j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            const std::size_t del = d[(i - 1) * cols + j] + 1;
            const std::size_t ins = d[i * cols + j - 1] + 1;
            d[i * cols + j] = std::min({diag, del, ins});
        }
    }

    EditCounts out;
    out.distance = d[n * cols + m];
    std::size_t i = n;
    std::size_t j = m;
    while (i > 0 || j > 0) {
        const std::size_t here = d[i * cols + j];
        if (i > 0 && j > 0) {
            const bool same = ref[i - 1] == hyp[j - 1];
            if (d[(i - 1) * cols + j - 1] + (same ? 0 : 1) == here) {
                if (!same) ++out.substitutions;
                --i;
                --j;
                continue;
            }
        }
        if (i > 0 && d[(i - 1) * cols + j] + 1 == here) {
            ++out.deletions;
            --i;
            continue;
        }
        ++out.insertions;
        --j;
    }
    if (out.substitutions + out.insertions + out.deletions != out.distance) {
        throw ContractViolation("levenshtein: backtrace does not reproduce the distance");
    }
    return out;
}

void CerReport::add(const EditCounts& counts, std::size_t reference_length) {
    substitutions += counts.substitutions;
    insertions += counts.insertions;
    deletions += counts.deletions;
    reference_chars += reference_length;
    ++pairs;
}

void CerReport::merge(const CerReport& other) {
    substitutions += other.substitutions;
    insertions += other.insertions;
    deletions += other.deletions;
    reference_chars += other.reference_chars;
    pairs += other.pairs;
}

std::optional<double> CerReport::cer() const {
    if (reference_chars == 0) return std::nullopt;
    return 100.0 * static_cast<double>(errors()) / static_cast<double>(reference_chars);
}

CerReport corpus_cer(const std::vector<TextPair>& pairs) {
    CerReport report;
    for (const auto& [ref, hyp] : pairs) report.add(levenshtein(ref, hyp), ref.size());
    if (report.reference_chars == 0) contract_fail("corpus_cer: no reference characters");
    return report;
}

std::vector<LengthBucket> empty_buckets() {
    const std::pair<std::size_t, std::size_t> ranges[] = {{0, 40}, {41, 45}, {46, 50}, {51, 55}, {56, 60}, {61, 100}};
    std::vector<LengthBucket> out;
    for (auto [lo, hi] : ranges) {
        LengthBucket b;
        b.lo = lo;
        b.hi = hi;
        b.label = std::to_string(lo) + "-" + std::to_string(hi);
        out.push_back(b);
    }
    return out;
}

std::size_t bucket_index(std::size_t reference_length) {
    if (reference_length <= 40) return 0;
    if (reference_length > 60) return 5;
    return (reference_length - 41) / 5 + 1;
}

std::vector<LengthBucket> bucketed_cer(const std::vector<TextPair>& pairs) {
    auto buckets = empty_buckets();
    for (const auto& [ref, hyp] : pairs) buckets[bucket_index(ref.size())].report.add(levenshtein(ref, hyp), ref.size());
    return buckets;
}

nlohmann::json to_json(const CerReport& report) {
    nlohmann::json j = {{"substitutions", report.substitutions},
                        {"insertions", report.insertions},
                        {"deletions", report.deletions},
                        {"reference_chars", report.reference_chars},
                        {"pairs", report.pairs}};
    const auto cer = report.cer();
    j["cer"] = cer ? nlohmann::json(*cer) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const std::vector<LengthBucket>& buckets) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& b : buckets) {
        nlohmann::json j = to_json(b.report);
        j["bucket"] = b.label;
        out.push_back(j);
    }
    return out;
}

namespace {

std::string format_row(const std::string& name, const CerReport& r) {
    char buf[160];
    const auto cer = r.cer();
    char cer_text[32];
    if (cer) {
        std::snprintf(cer_text, sizeof(cer_text), "%.2f", *cer);
    } else {
        std::snprintf(cer_text, sizeof(cer_text), "-");
    }
    std::snprintf(buf, sizeof(buf), "%-10s %7zu %9zu %6zu %6zu %6zu %8s\n", name.c_str(), r.pairs, r.reference_chars,
                  r.substitutions, r.insertions, r.deletions, cer_text);
    return buf;
}

}  // namespace

std::string format_table(const CerReport& total, const std::vector<LengthBucket>* buckets) {
    std::string out;
    char header[160];
    std::snprintf(header, sizeof(header), "%-10s %7s %9s %6s %6s %6s %8s\n", "set", "lines", "chars", "sub", "ins",
                  "del", "cer%");
    out += header;
    if (buckets) {
        for (const auto& b : *buckets) out += format_row(b.label, b.report);
    }
    out += format_row("total", total);
    return out;
}

std::string bucket_chart_svg(const std::vector<LengthBucket>& buckets) {
    const int bar_w = 60;
    const int gap = 20;
    const int plot_h = 200;
    const int left = 50;
    const int top = 20;
    const int width = left + static_cast<int>(buckets.size()) * (bar_w + gap) + gap;
    const int height = top + plot_h + 50;
    double max_cer = 1.0;
    for (const auto& b : buckets) max_cer = std::max(max_cer, b.report.cer().value_or(0.0));

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << width - gap / 2 << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"5\" y=\"" << top + 10 << "\" font-size=\"11\">CER %</text>\n";
    for (std::size_t i = 0; i < buckets.size(); ++i) {
        const int x = left + gap + static_cast<int>(i) * (bar_w + gap);
        const auto cer = buckets[i].report.cer();
        if (cer) {
            const int h = static_cast<int>(*cer / max_cer * plot_h);
            char label[32];
            std::snprintf(label, sizeof(label), "%.2f", *cer);
            svg << "<rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\"" << bar_w << "\" height=\"" << h
                << "\" fill=\"steelblue\"/>\n";
            svg << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << top + plot_h - h - 4
                << "\" font-size=\"11\" text-anchor=\"middle\">" << label << "</text>\n";
        } else {
            svg << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << top + plot_h - 4
                << "\" font-size=\"11\" text-anchor=\"middle\">n/a</text>\n";
        }
        svg << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << top + plot_h + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">" << buckets[i].label << "</text>\n";
    }
    svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 8
        << "\" font-size=\"12\" text-anchor=\"middle\">reference length (characters)</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace easter
