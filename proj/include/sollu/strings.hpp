#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <ranges>
#include <vector>

namespace sollu {

// Unit-cost edit distance, two-row DP.
template <std::ranges::random_access_range A, std::ranges::random_access_range B>
std::size_t levenshtein(const A& a, const B& b)
{
    const std::size_t n = std::ranges::size(a), m = std::ranges::size(b);
    if (n == 0 || m == 0)
        return std::max(n, m);
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    auto ai = std::ranges::begin(a);
    auto bi = std::ranges::begin(b);
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (ai[i - 1] == bi[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

struct SubstringMatch {
    std::size_t pos_a = 0;
    std::size_t pos_b = 0;

    friend bool operator==(const SubstringMatch&, const SubstringMatch&) = default;
    friend auto operator<=>(const SubstringMatch&, const SubstringMatch&) = default;
};

struct CommonSubstring {
    std::size_t length = 0;
    std::vector<SubstringMatch> matches; // start positions, ordered by (pos_a, pos_b)
};

// Longest common substring via the longest-common-suffix table over all prefix
// pairs. Every pair of start positions reaching the maximum is reported.
template <std::ranges::random_access_range A, std::ranges::random_access_range B>
CommonSubstring longest_common_substring(const A& a, const B& b)
{
    const std::size_t n = std::ranges::size(a), m = std::ranges::size(b);
    CommonSubstring out;
    std::vector<std::size_t> prev(m + 1, 0), cur(m + 1, 0);
    auto ai = std::ranges::begin(a);
    auto bi = std::ranges::begin(b);
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            cur[j] = ai[i - 1] == bi[j - 1] ? prev[j - 1] + 1 : 0;
            if (cur[j] == 0)
                continue;
            if (cur[j] > out.length) {
                out.length = cur[j];
                out.matches.clear();
            }
            if (cur[j] == out.length)
                out.matches.push_back({i - cur[j], j - cur[j]});
        }
        std::swap(prev, cur);
        cur[0] = 0;
    }
    return out;
}

} // namespace sollu
