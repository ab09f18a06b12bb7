#include <random>

#include <gtest/gtest.h>

#include <sollu/gmm.hpp>

using namespace sollu;

namespace {

using V2 = std::array<double, 2>;

std::vector<V2> two_blobs(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<V2> x;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = i % 2 ? 4.0 : -4.0;
        x.push_back({c + g(rng), 0.5 * g(rng)});
    }
    return x;
}

} // namespace

TEST(Gmm, LogSumExp)
{
    const std::vector<double> v = {-1000.0, -1000.0};
    EXPECT_NEAR(detail::log_sum_exp(v), -1000.0 + std::log(2.0), 1e-12);
}

TEST(Gmm, ValidatesParameters)
{
    EXPECT_THROW((DiagonalGmm<2>({0.5, 0.4}, {{0, 0}, {1, 1}}, {{1, 1}, {1, 1}})), Error);
    EXPECT_THROW((DiagonalGmm<2>({1.0}, {{0, 0}}, {{1, 0}})), Error);
    const DiagonalGmm<2> g({1.0}, {V2{0, 0}}, {V2{1, 1}});
    EXPECT_NEAR(g.log_likelihood({0, 0}), -std::log(2 * std::numbers::pi), 1e-12);
}

TEST(Gmm, EmTraceIsMonotone)
{
    const auto x = two_blobs(400, 1);
    EmOptions opt;
    opt.components = 4;
    EmTrace trace;
    fit_gmm<2>(x, opt, 9, &trace);
    ASSERT_GE(trace.log_likelihood.size(), 2u);
    for (std::size_t i = 1; i < trace.log_likelihood.size(); ++i)
        EXPECT_GE(trace.log_likelihood[i],
                  trace.log_likelihood[i - 1] - 1e-9 * std::abs(trace.log_likelihood[i - 1]));
}

TEST(Gmm, TwoComponentsFindBlobs)
{
    EmOptions opt;
    opt.components = 2;
    const auto g = fit_gmm<2>(two_blobs(1000, 2), opt, 5);
    auto means = g.means();
    std::sort(means.begin(), means.end());
    EXPECT_NEAR(means[0][0], -4.0, 0.2);
    EXPECT_NEAR(means[1][0], 4.0, 0.2);
    EXPECT_NEAR(g.weights()[0], 0.5, 0.05);
}

TEST(Gmm, FewerVectorsThanComponents)
{
    const std::vector<V2> x = {{0, 0}, {1, 1}, {2, 0}};
    EmTrace trace;
    const auto g = fit_gmm<2>(x, EmOptions{}, 1, &trace);
    EXPECT_EQ(trace.components, 3u);
    EXPECT_EQ(g.weights().size(), 3u);
    std::map<Bol, std::vector<V2>> data{{Bol::tei, x}};
    EXPECT_EQ(em_train<2>(data, EmOptions{}, 1, 1).warnings.size(), 1u);
}

TEST(Gmm, TrainingIndependentOfThreadCount)
{
    std::map<Bol, std::vector<V2>> data{
        {Bol::tei, two_blobs(200, 3)}, {Bol::tat, two_blobs(200, 4)}, {Bol::ta, two_blobs(200, 5)}};
    EmOptions opt;
    opt.components = 3;
    const auto a = em_train<2>(data, opt, 42, 1).model;
    const auto b = em_train<2>(data, opt, 42, 3).model;
    EXPECT_EQ(model_to_json(a).dump(), model_to_json(b).dump());
    const auto c = em_train<2>(data, opt, 43, 1).model;
    EXPECT_NE(model_to_json(a).dump(), model_to_json(c).dump());
}

TEST(Gmm, JsonRoundTripIsExact)
{
    std::map<Bol, std::vector<V2>> data{{Bol::tei, two_blobs(100, 6)}, {Bol::na, two_blobs(100, 7)}};
    EmOptions opt;
    opt.components = 2;
    const auto m = em_train<2>(data, opt, 1, 1).model;
    const auto back = model_from_json<2>(nlohmann::json::parse(model_to_json(m).dump()));
    EXPECT_EQ(model_to_json(back).dump(), model_to_json(m).dump());
    EXPECT_THROW(model_from_json<3>(model_to_json(m)), Error);
    EXPECT_THROW(model_from_json<2>(nlohmann::json{{"format", "other"}}), Error);
}

TEST(Gmm, ClassifyPicksBestAndBreaksTiesByCode)
{
    BasicGmmModel<2> m;
    m.classes.emplace(Bol::tei, DiagonalGmm<2>({1.0}, {V2{0, 0}}, {V2{1, 1}}));
    m.classes.emplace(Bol::ta, DiagonalGmm<2>({1.0}, {V2{0, 0}}, {V2{1, 1}}));
    m.classes.emplace(Bol::na, DiagonalGmm<2>({1.0}, {V2{5, 5}}, {V2{1, 1}}));
    const std::vector<V2> near0 = {{0.1, 0.0}};
    EXPECT_EQ(classify<2>(m, near0).bol, Bol::ta);
    const std::vector<V2> near5 = {{5.0, 4.9}};
    EXPECT_EQ(classify<2>(m, near5).bol, Bol::na);
    EXPECT_THROW(classify<2>(m, std::vector<V2>{}), Error);
}
