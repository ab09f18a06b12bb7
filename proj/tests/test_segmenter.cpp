#include <random>

#include <gtest/gtest.h>

#include <sollu/segmenter.hpp>

using namespace sollu;

namespace {

// Two clusters around 1 and 5, the upper one larger.
std::vector<double> bimodal()
{
    std::vector<double> v;
    for (int i = 0; i < 40; ++i)
        v.push_back(1.0 + 0.01 * (i % 5));
    for (int i = 0; i < 60; ++i)
        v.push_back(5.0 + 0.01 * (i % 5));
    return v;
}

AudioSignal bursts(const std::vector<std::pair<double, double>>& at, double total, double fs = 16000)
{
    AudioSignal sig;
    sig.sample_rate = fs;
    sig.samples.assign(std::size_t(total * fs), 0.0);
    for (const auto& [s, e] : at)
        for (auto i = std::size_t(s * fs); i < std::size_t(e * fs); ++i)
            sig.samples[i] = 0.5 * std::sin(2 * std::numbers::pi * 440.0 * double(i) / fs);
    return sig;
}

} // namespace

TEST(Histogram, ThresholdWeights)
{
    const auto v = bimodal();
    const auto p = histogram_peaks(v, 100);
    ASSERT_EQ(p.maxima.size(), 2u);
    EXPECT_DOUBLE_EQ(histogram_threshold(v, 0.0), p.maxima[1]);
    EXPECT_NEAR(histogram_threshold(v, 1e12), p.maxima[0], 1e-9);
    EXPECT_DOUBLE_EQ(histogram_threshold(v, 1.0), 0.5 * (p.maxima[0] + p.maxima[1]));
    EXPECT_NEAR(p.maxima[0], 1.0, 0.1);
    EXPECT_NEAR(p.maxima[1], 5.0, 0.1);
}

TEST(Histogram, DegenerateInput)
{
    EXPECT_THROW(histogram_threshold(std::vector<double>{}, 0.0), Error);
    EXPECT_THROW(histogram_threshold(bimodal(), -1.0), Error);
    // one mode: midpoint of the range
    const std::vector<double> flat(10, 2.0);
    EXPECT_DOUBLE_EQ(histogram_threshold(flat, 0.0), 2.0);
}

TEST(Segmenter, RecoversBursts)
{
    const std::vector<std::pair<double, double>> truth = {{0.3, 0.6}, {1.2, 1.5}, {2.0, 2.4}};
    const auto sig = bursts(truth, 3.0);
    const auto slices = segment_by_silence(sig);
    ASSERT_EQ(slices.size(), truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        EXPECT_NEAR(slices[i].start_time, truth[i].first, 0.09);
        EXPECT_NEAR(slices[i].end_time, truth[i].second, 0.09);
        EXPECT_EQ(slices[i].first_sample, std::size_t(std::llround(slices[i].start_time * 16000)));
    }
}

TEST(Segmenter, SilenceYieldsNothing)
{
    AudioSignal sig;
    sig.sample_rate = 8000;
    sig.samples.assign(8000, 0.0);
    EXPECT_TRUE(segment_by_silence(sig).empty());
    sig.samples.resize(100);
    EXPECT_TRUE(segment_by_silence(sig).empty());
}

TEST(Segmenter, ShortRunsDropped)
{
    SilenceAnalysis a;
    a.frame_len = 90;
    a.hop = 10;
    // runs of 1 frame (0.09 s) and 3 frames at fs = 1000
    a.silent = {true, false, true, true, true, true, true, true, true, true, true, true,
                false, false, false, true};
    const auto keep = slices_from_flags(a, 1000.0, 0.1);
    ASSERT_EQ(keep.size(), 1u);
    EXPECT_EQ(keep[0].first_sample, 120u);
    EXPECT_EQ(keep[0].last_sample, 14u * 10 + 90);
    EXPECT_EQ(slices_from_flags(a, 1000.0, 0.05).size(), 2u);
}

TEST(Segmenter, OverlappingExtentsSplitInGap)
{
    SilenceAnalysis a;
    a.frame_len = 90;
    a.hop = 10;
    a.silent = {false, false, true, true, false, false};
    const auto s = slices_from_flags(a, 1000.0, 0.0);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_LT(s[0].last_sample, s[1].first_sample);
    EXPECT_EQ(s[0].last_sample, (1u + 4u) * 10 / 2 + 45);
    EXPECT_EQ(s[0].first_sample, 0u);
    EXPECT_EQ(s[1].last_sample, 5u * 10 + 90);
}
