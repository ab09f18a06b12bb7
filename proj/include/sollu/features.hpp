#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "audio.hpp"
#include "segmenter.hpp"

namespace sollu {

inline constexpr std::size_t kCepstra = 13;
inline constexpr std::size_t kFeatureDim = 3 * kCepstra;

using FeatureVector = std::array<double, kFeatureDim>;

struct FeatureSequence {
    std::vector<FeatureVector> vectors;
    std::optional<NonSilentSlice> slice;
};

struct MfccConfig {
    double frame = 0.025;
    double hop = 0.010;
    double preemphasis = 0.97;
    std::size_t mel_filters = 26;
    double low_hz = 0.0;
    double high_hz = 0.0; // 0 means Nyquist
    std::size_t delta_window = 2;
    double log_floor = 1e-10;
};

class SliceTooShort : public Error {
public:
    SliceTooShort() : Error("slice too short") {}
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Regression deltas over +-w frames with replicated edges.
inline std::vector<std::array<double, kCepstra>>
delta_features(const std::vector<std::array<double, kCepstra>>& c, std::size_t w)
{
    const std::ptrdiff_t n = std::ptrdiff_t(c.size());
    double denom = 0.0;
    for (std::size_t k = 1; k <= w; ++k)
        denom += double(k * k);
    denom *= 2.0;
    std::vector<std::array<double, kCepstra>> d(c.size());
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < kCepstra; ++j) {
            double acc = 0.0;
            for (std::size_t k = 1; k <= w; ++k) {
                const auto ki = std::ptrdiff_t(k);
                const auto hi = std::min(n - 1, t + ki);
                const auto lo = std::max<std::ptrdiff_t>(0, t - ki);
                acc += double(k) * (c[std::size_t(hi)][j] - c[std::size_t(lo)][j]);
            }
            d[std::size_t(t)][j] = acc / denom;
        }
    }
    return d;
}

class MfccExtractor {
public:
    MfccExtractor(double sample_rate, const MfccConfig& cfg = {})
        : cfg_(cfg), sr_(sample_rate), frame_len_(seconds_to_samples(cfg.frame, sample_rate)),
          hop_(seconds_to_samples(cfg.hop, sample_rate)), fft_(next_pow2(frame_len_))
    {
        if (frame_len_ < 2 || hop_ == 0 || cfg.mel_filters < kCepstra)
            throw Error("invalid MFCC configuration");
        window_.resize(frame_len_);
        for (std::size_t n = 0; n < frame_len_; ++n)
            window_[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(n) /
                                                 double(frame_len_ - 1));
        build_filterbank();
        dct_.resize(kCepstra * cfg_.mel_filters);
        const double m = double(cfg_.mel_filters);
        for (std::size_t k = 0; k < kCepstra; ++k) {
            const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / m);
            for (std::size_t j = 0; j < cfg_.mel_filters; ++j)
                dct_[k * cfg_.mel_filters + j] =
                    scale * std::cos(std::numbers::pi * double(k) * (double(j) + 0.5) / m);
        }
    }

    std::size_t frame_length() const { return frame_len_; }
    double sample_rate() const { return sr_; }

    FeatureSequence compute(std::span<const double> x) const
    {
        if (x.size() < frame_len_)
            throw SliceTooShort();
        const std::size_t frames = (x.size() - frame_len_) / hop_ + 1;
        std::vector<std::array<double, kCepstra>> ceps(frames);
        std::vector<double> buf(fft_.size());
        std::vector<cplx> spec(fft_.bins());
        std::vector<double> mel(cfg_.mel_filters);
        std::vector<double> power(fft_.bins());
        for (std::size_t t = 0; t < frames; ++t) {
            const std::size_t off = t * hop_;
            std::fill(buf.begin(), buf.end(), 0.0);
            for (std::size_t n = 0; n < frame_len_; ++n) {
                const double prev = n == 0 ? x[off] : x[off + n - 1];
                buf[n] = (x[off + n] - cfg_.preemphasis * prev) * window_[n];
            }
            fft_.forward(buf, spec);
            for (std::size_t k = 0; k < spec.size(); ++k)
                power[k] = std::norm(spec[k]);
            for (std::size_t j = 0; j < cfg_.mel_filters; ++j) {
                double e = 0.0;
                for (const auto& [k, w] : filters_[j])
                    e += w * power[k];
                mel[j] = std::log(std::max(e, cfg_.log_floor));
            }
            for (std::size_t k = 0; k < kCepstra; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < cfg_.mel_filters; ++j)
                    acc += dct_[k * cfg_.mel_filters + j] * mel[j];
                ceps[t][k] = acc;
            }
        }
        const auto d1 = delta_features(ceps, cfg_.delta_window);
        const auto d2 = delta_features(d1, cfg_.delta_window);
        FeatureSequence out;
        out.vectors.resize(frames);
        for (std::size_t t = 0; t < frames; ++t) {
            for (std::size_t k = 0; k < kCepstra; ++k) {
                out.vectors[t][k] = ceps[t][k];
                out.vectors[t][kCepstra + k] = d1[t][k];
                out.vectors[t][2 * kCepstra + k] = d2[t][k];
            }
        }
        return out;
    }

    FeatureSequence compute(const AudioSignal& sig, const NonSilentSlice& s) const
    {
        const std::size_t last = std::min(s.last_sample, sig.size());
        const std::size_t first = std::min(s.first_sample, last);
        auto seq = compute(std::span<const double>(sig.samples).subspan(first, last - first));
        seq.slice = s;
        return seq;
    }

private:
    void build_filterbank()
    {
        const double nyq = sr_ / 2.0;
        const double hi = cfg_.high_hz > 0.0 ? std::min(cfg_.high_hz, nyq) : nyq;
        const double mlo = hz_to_mel(cfg_.low_hz), mhi = hz_to_mel(hi);
        const std::size_t nf = cfg_.mel_filters;
        std::vector<double> edges(nf + 2);
        for (std::size_t i = 0; i < nf + 2; ++i)
            edges[i] = mel_to_hz(mlo + (mhi - mlo) * double(i) / double(nf + 1));
        const double bin_hz = sr_ / double(fft_.size());
        filters_.assign(nf, {});
        for (std::size_t j = 0; j < nf; ++j) {
            const double l = edges[j], c = edges[j + 1], r = edges[j + 2];
            for (std::size_t k = 0; k <= fft_.size() / 2; ++k) {
                const double f = double(k) * bin_hz;
                double w = 0.0;
                if (f > l && f <= c)
                    w = (f - l) / (c - l);
                else if (f > c && f < r)
                    w = (r - f) / (r - c);
                if (w > 0.0)
                    filters_[j].push_back({k, w});
            }
        }
    }

    MfccConfig cfg_;
    double sr_;
    std::size_t frame_len_, hop_;
    RealFft fft_;
    std::vector<double> window_;
    std::vector<std::vector<std::pair<std::size_t, double>>> filters_;
    std::vector<double> dct_;
};

inline FeatureSequence mfcc(std::span<const double> x, double sample_rate,
                            const MfccConfig& cfg = {})
{
    return MfccExtractor(sample_rate, cfg).compute(x);
}

} // namespace sollu
