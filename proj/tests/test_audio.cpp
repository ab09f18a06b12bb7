#include <cstring>

#include <gtest/gtest.h>

#include <sollu/audio.hpp>

using namespace sollu;

namespace {

std::vector<std::uint8_t> make_wav(int format, int channels, int bits, int rate,
                                   const std::vector<std::uint8_t>& data)
{
    std::vector<std::uint8_t> w;
    auto put = [&](std::uint32_t v, int n) {
        for (int i = 0; i < n; ++i)
            w.push_back(std::uint8_t(v >> (8 * i)));
    };
    auto tag = [&](const char* s) { w.insert(w.end(), s, s + 4); };
    tag("RIFF");
    put(36 + std::uint32_t(data.size()), 4);
    tag("WAVE");
    tag("fmt ");
    put(16, 4);
    put(std::uint32_t(format), 2);
    put(std::uint32_t(channels), 2);
    put(std::uint32_t(rate), 4);
    put(std::uint32_t(rate * channels * bits / 8), 4);
    put(std::uint32_t(channels * bits / 8), 2);
    put(std::uint32_t(bits), 2);
    tag("data");
    put(std::uint32_t(data.size()), 4);
    w.insert(w.end(), data.begin(), data.end());
    return w;
}

void put16(std::vector<std::uint8_t>& d, std::int16_t v)
{
    d.push_back(std::uint8_t(std::uint16_t(v) & 0xff));
    d.push_back(std::uint8_t(std::uint16_t(v) >> 8));
}

} // namespace

TEST(Wav, Pcm16RoundTrip)
{
    AudioSignal sig;
    sig.sample_rate = 22050;
    for (int i = 0; i < 1000; ++i)
        sig.samples.push_back(0.9 * std::sin(0.01 * i));
    const auto back = decode_wav(encode_wav16(sig));
    ASSERT_EQ(back.size(), sig.size());
    EXPECT_EQ(back.sample_rate, 22050);
    for (std::size_t i = 0; i < sig.size(); ++i)
        EXPECT_NEAR(back.samples[i], sig.samples[i], 1.0 / 32768);
}

TEST(Wav, StereoIsAveragedToMono)
{
    std::vector<std::uint8_t> d;
    const std::int16_t left[] = {1000, -32768, 32767, 0};
    const std::int16_t right[] = {3000, 32767, 32767, -7};
    for (int i = 0; i < 4; ++i) {
        put16(d, left[i]);
        put16(d, right[i]);
    }
    const auto sig = decode_wav(make_wav(1, 2, 16, 8000, d));
    ASSERT_EQ(sig.size(), 4u);
    for (int i = 0; i < 4; ++i)
        EXPECT_DOUBLE_EQ(sig.samples[std::size_t(i)], (left[i] / 32768.0 + right[i] / 32768.0) / 2.0);
}

TEST(Wav, Pcm24AndFloat)
{
    std::vector<std::uint8_t> d24 = {0x00, 0x00, 0x40, 0x00, 0x00, 0xc0};
    const auto s24 = decode_wav(make_wav(1, 1, 24, 8000, d24));
    ASSERT_EQ(s24.size(), 2u);
    EXPECT_DOUBLE_EQ(s24.samples[0], 0.5);
    EXPECT_DOUBLE_EQ(s24.samples[1], -0.5);

    std::vector<std::uint8_t> df(8);
    const float vals[2] = {0.25f, -0.75f};
    std::memcpy(df.data(), vals, 8);
    const auto sf = decode_wav(make_wav(3, 1, 32, 8000, df));
    ASSERT_EQ(sf.size(), 2u);
    EXPECT_DOUBLE_EQ(sf.samples[0], 0.25);
    EXPECT_DOUBLE_EQ(sf.samples[1], -0.75);
}

TEST(Wav, RejectsBadInput)
{
    EXPECT_THROW(decode_wav(make_wav(2, 1, 4, 8000, {1, 2, 3, 4})), WavError);
    EXPECT_THROW(decode_wav(make_wav(1, 1, 16, 8000, {})), WavError);
    const std::vector<std::uint8_t> junk(64, 7);
    EXPECT_THROW(decode_wav(junk), WavError);
    EXPECT_THROW(load_wav("/nonexistent/file.wav"), WavError);
}

TEST(Framing, CountAndOffsets)
{
    AudioSignal sig;
    sig.sample_rate = 1000;
    sig.samples.assign(1000, 0.1);
    const auto f = frame_signal(sig, 0.090, 0.010);
    ASSERT_EQ(f.size(), (1000u - 90u) / 10u + 1u);
    EXPECT_EQ(f[3].samples.size(), 90u);
    EXPECT_DOUBLE_EQ(f[3].start_time, 0.03);
    EXPECT_TRUE(frame_signal(sig, 2.0, 0.01).empty());
    EXPECT_THROW(frame_signal(sig, 0.01, 0.02), Error);
    EXPECT_THROW(frame_signal(sig, 0.01, 0.0), Error);
}

TEST(Framing, EnergyAndCentroid)
{
    const std::vector<double> x = {1.0, -1.0, 2.0, 0.0};
    EXPECT_DOUBLE_EQ(frame_energy(x), 6.0 / 4.0);

    // A unit impulse has a flat spectrum: centroid is the mean of 1..N.
    std::vector<double> imp(64, 0.0);
    imp[0] = 1.0;
    EXPECT_NEAR(spectral_centroid(imp, Dft(64)), 32.5, 1e-9);
    EXPECT_EQ(spectral_centroid(std::vector<double>(64, 0.0), Dft(64)), 0.0);
}
