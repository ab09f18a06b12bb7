#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "fft.hpp"

namespace sollu {

struct AudioSignal {
    std::vector<double> samples;
    double sample_rate = 44100.0;

    std::size_t size() const { return samples.size(); }
    double duration() const { return double(samples.size()) / sample_rate; }
};

// A view into the parent signal; valid while the signal is alive.
struct Frame {
    std::span<const double> samples;
    double start_time = 0.0;
    double win_len = 0.0;
    std::size_t index = 0;
};

class WavError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::uint32_t read_le(const std::uint8_t* p, int bytes)
{
    std::uint32_t v = 0;
    for (int i = 0; i < bytes; ++i)
        v |= std::uint32_t(p[i]) << (8 * i);
    return v;
}

inline void put_le(std::vector<std::uint8_t>& out, std::uint32_t v, int bytes)
{
    for (int i = 0; i < bytes; ++i)
        out.push_back(std::uint8_t((v >> (8 * i)) & 0xff));
}

} // namespace detail

inline AudioSignal decode_wav(std::span<const std::uint8_t> data)
{
    using detail::read_le;
    if (data.size() < 12 || std::memcmp(data.data(), "RIFF", 4) != 0 ||
        std::memcmp(data.data() + 8, "WAVE", 4) != 0)
        throw WavError("not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    std::span<const std::uint8_t> payload;
    bool have_data = false;

    std::size_t pos = 12;
    while (pos + 8 <= data.size()) {
        const std::uint8_t* hdr = data.data() + pos;
        const std::uint32_t len = read_le(hdr + 4, 4);
        const std::size_t body = pos + 8;
        const std::size_t avail = std::min<std::size_t>(len, data.size() - body);
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (avail < 16)
                throw WavError("truncated fmt chunk");
            const std::uint8_t* f = data.data() + body;
            format = std::uint16_t(read_le(f, 2));
            channels = std::uint16_t(read_le(f + 2, 2));
            rate = read_le(f + 4, 4);
            bits = std::uint16_t(read_le(f + 14, 2));
            if (format == 0xFFFE) {
                if (avail < 26)
                    throw WavError("truncated extensible fmt chunk");
                format = std::uint16_t(read_le(f + 24, 2));
            }
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            payload = data.subspan(body, avail);
            have_data = true;
        }
        pos = body + len + (len & 1);
    }

    if (!have_fmt || !have_data)
        throw WavError("missing fmt or data chunk");
    if (channels == 0 || rate == 0)
        throw WavError("invalid channel count or sample rate");

    const bool pcm = format == 1 && (bits == 16 || bits == 24);
    const bool flt = format == 3 && bits == 32;
    if (!pcm && !flt)
        throw WavError("unsupported encoding (format " + std::to_string(format) + ", " +
                       std::to_string(bits) + " bits)");

    const std::size_t bytes = bits / 8;
    const std::size_t frame_bytes = bytes * channels;
    const std::size_t count = payload.size() / frame_bytes;
    if (count == 0)
        throw WavError("zero-length audio");

    AudioSignal sig;
    sig.sample_rate = double(rate);
    sig.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const std::uint8_t* p = payload.data() + i * frame_bytes + c * bytes;
            double v;
            if (flt) {
                float f;
                std::uint32_t raw = read_le(p, 4);
                std::memcpy(&f, &raw, 4);
                v = std::isfinite(f) ? std::clamp(double(f), -1.0, 1.0) : 0.0;
            } else if (bits == 16) {
                v = double(std::int16_t(read_le(p, 2))) / 32768.0;
            } else {
                std::int32_t s = std::int32_t(read_le(p, 3) << 8) >> 8;
                v = double(s) / 8388608.0;
            }
            acc += v;
        }
        sig.samples[i] = acc / double(channels);
    }
    return sig;
}

inline AudioSignal load_wav(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw WavError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_wav(bytes);
}

// Mono 16-bit PCM. Samples are clipped to [-1, 1) and rounded.
inline std::vector<std::uint8_t> encode_wav16(const AudioSignal& sig)
{
    using detail::put_le;
    const std::uint32_t rate = std::uint32_t(std::lround(sig.sample_rate));
    const std::uint32_t data_len = std::uint32_t(sig.samples.size() * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_len);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_le(out, 36 + data_len, 4);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put_le(out, 16, 4);
    put_le(out, 1, 2);
    put_le(out, 1, 2);
    put_le(out, rate, 4);
    put_le(out, rate * 2, 4);
    put_le(out, 2, 2);
    put_le(out, 16, 2);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_le(out, data_len, 4);
    for (double s : sig.samples) {
        const long q = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
        put_le(out, std::uint32_t(std::uint16_t(std::int16_t(q))), 2);
    }
    return out;
}

inline std::size_t seconds_to_samples(double seconds, double sample_rate)
{
    return std::size_t(std::llround(seconds * sample_rate));
}

inline std::vector<Frame> frame_signal(const AudioSignal& sig, double win, double step)
{
    if (!(win > 0.0) || !(step > 0.0) || step > win)
        throw Error("frame_signal requires 0 < step <= win");
    const std::size_t n = seconds_to_samples(win, sig.sample_rate);
    const std::size_t hop = std::max<std::size_t>(1, seconds_to_samples(step, sig.sample_rate));
    std::vector<Frame> frames;
    if (n == 0 || n > sig.size())
        return frames;
    const std::size_t count = (sig.size() - n) / hop + 1;
    frames.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        frames.push_back({std::span<const double>(sig.samples).subspan(i * hop, n),
                          double(i * hop) / sig.sample_rate, win, i});
    }
    return frames;
}

inline double frame_energy(std::span<const double> x)
{
    if (x.empty())
        return 0.0;
    double acc = 0.0;
    for (double v : x)
        acc += v * v;
    return acc / double(x.size());
}

inline double frame_energy(const Frame& f) { return frame_energy(f.samples); }

// Weighted mean of (n + 1) over all N DFT magnitudes; 0 for a frame with no
// spectral mass.
inline double spectral_centroid(std::span<const double> x, const Dft& dft)
{
    const auto mag = dft.magnitudes(x);
    double num = 0.0, den = 0.0;
    for (std::size_t n = 0; n < mag.size(); ++n) {
        num += double(n + 1) * mag[n];
        den += mag[n];
    }
    return den > 0.0 ? num / den : 0.0;
}

inline double spectral_centroid(const Frame& f)
{
    return spectral_centroid(f.samples, Dft(f.samples.size()));
}

} // namespace sollu
