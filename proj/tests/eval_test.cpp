#include <gtest/gtest.h>

#include <functional>
#include <map>

#include "easter/error.hpp"
#include "easter/eval.hpp"
#include "easter/rng.hpp"

using namespace easter;

namespace {

// Suffix-recursive edit distance with memoization; shares nothing with the
// library's prefix table.
std::size_t distance_oracle(const std::u32string& a, const std::u32string& b) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
        if (i == a.size()) return b.size() - j;
        if (j == b.size()) return a.size() - i;
        const auto key = std::make_pair(i, j);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        std::size_t best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
        best = std::min(best, go(i + 1, j) + 1);
        best = std::min(best, go(i, j + 1) + 1);
        return memo[key] = best;
    };
    return go(0, 0);
}

std::u32string random_string(Rng& rng, int alphabet, int max_len) {
    std::u32string s;
    const auto len = rng.uniform_int(0, max_len);
    for (std::int64_t i = 0; i < len; ++i) s.push_back(U'a' + static_cast<char32_t>(rng.uniform_int(0, alphabet - 1)));
    return s;
}

}  // namespace

TEST(Levenshtein, Examples) {
    EXPECT_EQ(levenshtein(U"abc", U"abc"), (EditCounts{0, 0, 0, 0}));
    EXPECT_EQ(levenshtein(U"abc", U""), (EditCounts{3, 0, 0, 3}));
    EXPECT_EQ(levenshtein(U"", U"ab"), (EditCounts{2, 0, 2, 0}));
    EXPECT_EQ(levenshtein(U"", U""), (EditCounts{}));
    EXPECT_EQ(distance_oracle(U"kitten", U"sitting"), 3u);
    const EditCounts k = levenshtein(U"kitten", U"sitting");
    EXPECT_EQ(k.distance, 3u);
    EXPECT_EQ(k.substitutions, 2u);
    EXPECT_EQ(k.insertions, 1u);
    EXPECT_EQ(k.deletions, 0u);
}

TEST(Levenshtein, CaseSensitive) { EXPECT_EQ(levenshtein(U"Abc", U"abc").substitutions, 1u); }

TEST(Levenshtein, TieOrderPrefersSubstitution) {
    // "ab" -> "ba": two substitutions or a delete plus an insert, both cost 2.
    const EditCounts c = levenshtein(U"ab", U"ba");
    EXPECT_EQ(c.distance, 2u);
    EXPECT_EQ(c.substitutions, 2u);
}

TEST(LevenshteinProperty, MatchesOracleOnRandomPairs) {
    Rng rng(1);
    for (int trial = 0; trial < 10000; ++trial) {
        const int alphabet = static_cast<int>(rng.uniform_int(1, 5));
        const auto a = random_string(rng, alphabet, 20);
        const auto b = random_string(rng, alphabet, 20);
        const EditCounts c = levenshtein(a, b);
        ASSERT_EQ(c.distance, distance_oracle(a, b)) << "trial " << trial;
        ASSERT_EQ(c.substitutions + c.insertions + c.deletions, c.distance);
        ASSERT_EQ(a.size() - c.deletions + c.insertions, b.size());
    }
}

TEST(LevenshteinProperty, MetricAxioms) {
    Rng rng(2);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto a = random_string(rng, 3, 12);
        const auto b = random_string(rng, 3, 12);
        const auto c = random_string(rng, 3, 12);
        const auto ab = levenshtein(a, b).distance;
        EXPECT_EQ(ab, levenshtein(b, a).distance);
        EXPECT_LE(levenshtein(a, c).distance, ab + levenshtein(b, c).distance);
        EXPECT_EQ(ab == 0, a == b);
    }
}

TEST(CorpusCer, Examples) {
    EXPECT_EQ(corpus_cer({{U"abc", U"abc"}, {U"de", U"de"}}).cer(), 0.0);
    EXPECT_DOUBLE_EQ(*corpus_cer({{U"kitten", U"sitting"}}).cer(), 50.0);
    // Micro average is 1/5; the per-line mean would be 50%.
    EXPECT_DOUBLE_EQ(*corpus_cer({{U"aaaa", U"aaaa"}, {U"b", U"c"}}).cer(), 20.0);
    EXPECT_THROW(corpus_cer({}), ContractViolation);
    EXPECT_THROW(corpus_cer({{U"", U"x"}}), ContractViolation);
}

TEST(CorpusCerProperty, ConcatenationIsAdditive) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<TextPair> left, right, all;
        for (int i = 0; i < 5; ++i) {
            left.emplace_back(U"x" + random_string(rng, 4, 15), random_string(rng, 4, 15));
            right.emplace_back(U"y" + random_string(rng, 4, 15), random_string(rng, 4, 15));
        }
        all = left;
        all.insert(all.end(), right.begin(), right.end());
        CerReport merged = corpus_cer(left);
        const CerReport r = corpus_cer(right);
        merged.merge(r);
        const CerReport whole = corpus_cer(all);
        EXPECT_EQ(merged, whole);
        const double weighted = (*corpus_cer(left).cer() * double(corpus_cer(left).reference_chars) +
                                 *r.cer() * double(r.reference_chars)) /
                                double(whole.reference_chars);
        EXPECT_NEAR(*whole.cer(), weighted, 1e-9);
    }
}

TEST(Buckets, BoundariesFollowLengthCategories) {
    const auto b = empty_buckets();
    ASSERT_EQ(b.size(), 6u);
    const char* labels[] = {"0-40", "41-45", "46-50", "51-55", "56-60", "61-100"};
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(b[i].label, labels[i]);
    EXPECT_EQ(bucket_index(0), 0u);
    EXPECT_EQ(bucket_index(40), 0u);
    EXPECT_EQ(bucket_index(41), 1u);
    EXPECT_EQ(bucket_index(45), 1u);
    EXPECT_EQ(bucket_index(46), 2u);
    EXPECT_EQ(bucket_index(60), 4u);
    EXPECT_EQ(bucket_index(61), 5u);
    EXPECT_EQ(bucket_index(100), 5u);
    EXPECT_EQ(bucket_index(250), 5u);
}

TEST(Buckets, PartitionCorpusCounts) {
    Rng rng(4);
    std::vector<TextPair> pairs;
    for (int i = 0; i < 300; ++i) {
        std::u32string ref(static_cast<std::size_t>(rng.uniform_int(1, 60)), U'a');
        for (auto& c : ref) c = U'a' + static_cast<char32_t>(rng.uniform_int(0, 3));
        pairs.emplace_back(ref, random_string(rng, 4, 70));
    }
    const auto buckets = bucketed_cer(pairs);
    CerReport sum;
    for (const auto& b : buckets) sum.merge(b.report);
    EXPECT_EQ(sum, corpus_cer(pairs));
    EXPECT_FALSE(buckets[5].report.cer().has_value());  // no reference longer than 60
    EXPECT_EQ(buckets[5].report.reference_chars, 0u);
}

TEST(Reports, JsonTableAndSvg) {
    const std::vector<TextPair> pairs{{U"kitten", U"sitting"}, {U"abc", U"abc"}};
    const CerReport r = corpus_cer(pairs);
    const auto j = to_json(r);
    EXPECT_EQ(j.at("substitutions"), 2);
    EXPECT_EQ(j.at("insertions"), 1);
    EXPECT_EQ(j.at("reference_chars"), 9);
    EXPECT_NEAR(j.at("cer").get<double>(), 100.0 / 3.0, 1e-9);
    const auto buckets = bucketed_cer(pairs);
    const auto bj = to_json(buckets);
    ASSERT_EQ(bj.size(), 6u);
    EXPECT_TRUE(bj[1].at("cer").is_null());
    const std::string table = format_table(r, &buckets);
    EXPECT_NE(table.find("33.33"), std::string::npos) << table;
    EXPECT_NE(table.find("61-100"), std::string::npos) << table;
    const std::string svg = bucket_chart_svg(buckets);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
