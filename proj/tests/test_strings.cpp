#include <functional>
#include <random>

#include <gtest/gtest.h>

#include <sollu/strings.hpp>

using namespace sollu;

namespace {

std::size_t lev_recursive(const std::vector<int>& a, std::size_t i, const std::vector<int>& b,
                          std::size_t j)
{
    if (i == 0)
        return j;
    if (j == 0)
        return i;
    return std::min({lev_recursive(a, i - 1, b, j) + 1, lev_recursive(a, i, b, j - 1) + 1,
                     lev_recursive(a, i - 1, b, j - 1) + (a[i - 1] != b[j - 1])});
}

std::vector<int> random_string(std::mt19937_64& rng, std::size_t max_len, int alphabet)
{
    std::vector<int> s(rng() % (max_len + 1));
    for (auto& c : s)
        c = 1 + int(rng() % std::uint64_t(alphabet));
    return s;
}

} // namespace

TEST(Levenshtein, MatchesRecursiveDefinition)
{
    std::mt19937_64 rng(11);
    for (int t = 0; t < 300; ++t) {
        const auto a = random_string(rng, 7, 4), b = random_string(rng, 7, 4);
        EXPECT_EQ(levenshtein(a, b), lev_recursive(a, a.size(), b, b.size()));
    }
}

TEST(Levenshtein, KnownValues)
{
    const std::string k = "kitten", s = "sitting";
    EXPECT_EQ(levenshtein(k, s), 3u);
    EXPECT_EQ(levenshtein(std::string(), s), 7u);
    EXPECT_EQ(levenshtein(k, k), 0u);
}

TEST(Levenshtein, MetricAxioms)
{
    std::mt19937_64 rng(12);
    for (int t = 0; t < 300; ++t) {
        const auto a = random_string(rng, 8, 3), b = random_string(rng, 8, 3),
                   c = random_string(rng, 8, 3);
        EXPECT_EQ(levenshtein(a, b) == 0, a == b);
        EXPECT_EQ(levenshtein(a, b), levenshtein(b, a));
        EXPECT_LE(levenshtein(a, c), levenshtein(a, b) + levenshtein(b, c));
    }
}

TEST(LongestCommonSubstring, MatchesBruteForce)
{
    std::mt19937_64 rng(13);
    for (int t = 0; t < 300; ++t) {
        const auto a = random_string(rng, 10, 3), b = random_string(rng, 10, 3);
        std::size_t best = 0;
        std::vector<SubstringMatch> where;
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j) {
                std::size_t l = 0;
                while (i + l < a.size() && j + l < b.size() && a[i + l] == b[j + l])
                    ++l;
                if (l > best) {
                    best = l;
                    where.clear();
                }
                if (l == best && l > 0)
                    where.push_back({i, j});
            }
        const auto r = longest_common_substring(a, b);
        EXPECT_EQ(r.length, best);
        EXPECT_EQ(r.matches, where);
    }
}

TEST(LongestCommonSubstring, EmptyInput)
{
    const std::vector<int> a, b = {1, 2};
    const auto r = longest_common_substring(a, b);
    EXPECT_EQ(r.length, 0u);
    EXPECT_TRUE(r.matches.empty());
}
