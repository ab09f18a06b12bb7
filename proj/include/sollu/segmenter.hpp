#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "audio.hpp"

namespace sollu {

struct NonSilentSlice {
    double start_time = 0.0;
    double end_time = 0.0;
    std::size_t first_sample = 0;
    std::size_t last_sample = 0; // one past the end

    double duration() const { return end_time - start_time; }
};

struct SegmenterConfig {
    double win = 0.090;
    double step = 0.010;
    double weight = 0.0;
    double min_slice = 0.05;
    std::size_t bins = 100;
};

struct HistogramPeaks {
    std::vector<double> smoothed;
    std::vector<double> maxima; // values at local maxima, ascending
    double lo = 0.0, hi = 0.0;
};

// Bins span [min, max] unless a lower edge is supplied.
inline HistogramPeaks histogram_peaks(std::span<const double> values, std::size_t bins = 100,
                                      std::optional<double> lower = std::nullopt)
{
    HistogramPeaks out;
    if (values.empty() || bins == 0)
        return out;
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    out.lo = lower ? std::min(*lower, *mn) : *mn;
    out.hi = *mx;
    if (!(out.hi > out.lo))
        return out;
    const double width = (out.hi - out.lo) / double(bins);
    std::vector<double> counts(bins, 0.0);
    for (double v : values) {
        auto b = std::size_t((v - out.lo) / width);
        counts[std::min(b, bins - 1)] += 1.0;
    }
    out.smoothed.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        const std::size_t a = i == 0 ? 0 : i - 1;
        const std::size_t b = std::min(bins - 1, i + 1);
        double s = 0.0;
        for (std::size_t j = a; j <= b; ++j)
            s += counts[j];
        out.smoothed[i] = s / double(b - a + 1);
    }
    // A plateau counts once, at its centre, if both sides are lower.
    const auto& s = out.smoothed;
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < bins;) {
        std::size_t j = i;
        while (j + 1 < bins && s[j + 1] == s[i])
            ++j;
        const double left = i == 0 ? ninf : s[i - 1];
        const double right = j + 1 == bins ? ninf : s[j + 1];
        if (s[i] > left && s[i] > right)
            out.maxima.push_back(out.lo + (0.5 * double(i + j) + 0.5) * width);
        i = j + 1;
    }
    return out;
}

inline double histogram_threshold(std::span<const double> values, double weight,
                                  std::size_t bins = 100, std::optional<double> lower = std::nullopt)
{
    if (values.empty())
        throw Error("histogram_threshold on empty sequence");
    if (weight < 0.0)
        throw Error("histogram weight must be non-negative");
    const auto peaks = histogram_peaks(values, bins, lower);
    if (peaks.maxima.size() < 2)
        return 0.5 * (peaks.lo + peaks.hi);
    const double m1 = peaks.maxima[0], m2 = peaks.maxima[1];
    return (weight * m1 + m2) / (weight + 1.0);
}

struct SilenceAnalysis {
    std::vector<double> energy;
    std::vector<double> centroid;
    std::vector<bool> silent;
    double energy_threshold = 0.0;
    double centroid_threshold = 0.0;
    std::size_t frame_len = 0;
    std::size_t hop = 0;
};

inline SilenceAnalysis analyze_silence(const AudioSignal& sig, const SegmenterConfig& cfg = {})
{
    SilenceAnalysis out;
    const auto frames = frame_signal(sig, cfg.win, cfg.step);
    if (frames.empty())
        return out;
    out.frame_len = frames.front().samples.size();
    out.hop = seconds_to_samples(cfg.step, sig.sample_rate);
    const Dft dft(out.frame_len);
    out.energy.reserve(frames.size());
    out.centroid.reserve(frames.size());
    std::vector<double> centred(out.frame_len);
    for (const auto& f : frames) {
        const double e = frame_energy(f);
        out.energy.push_back(e);
        if (e == 0.0) {
            out.centroid.push_back(0.0);
            continue;
        }
        // Without the mean, the full-length centroid of any real frame is
        // (N + 2) / 2, so DC leakage cannot push busy frames under T_C.
        double mean = 0.0;
        for (double v : f.samples)
            mean += v;
        mean /= double(f.samples.size());
        for (std::size_t k = 0; k < centred.size(); ++k)
            centred[k] = f.samples[k] - mean;
        out.centroid.push_back(spectral_centroid(centred, dft));
    }
    // Both features are non-negative with digital silence at 0; anchoring the
    // bins there keeps a signal with no silence from being split on noise.
    out.energy_threshold = histogram_threshold(out.energy, cfg.weight, cfg.bins, 0.0);
    out.centroid_threshold = histogram_threshold(out.centroid, cfg.weight, cfg.bins, 0.0);
    out.silent.resize(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        out.silent[i] = out.energy[i] < out.energy_threshold ||
                        out.centroid[i] < out.centroid_threshold ||
                        out.energy[i] == 0.0;
    }
    return out;
}

inline std::vector<NonSilentSlice> slices_from_flags(const SilenceAnalysis& a, double sample_rate,
                                                     double min_slice)
{
    struct Run {
        std::size_t first_frame, last_frame;
    };
    std::vector<Run> runs;
    const std::size_t n = a.silent.size();
    for (std::size_t i = 0; i < n;) {
        if (a.silent[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && !a.silent[j + 1])
            ++j;
        const double len = double((j - i) * a.hop + a.frame_len) / sample_rate;
        if (len >= min_slice)
            runs.push_back({i, j});
        i = j + 1;
    }

    std::vector<NonSilentSlice> out;
    out.reserve(runs.size());
    for (const auto& r : runs) {
        NonSilentSlice s;
        s.first_sample = r.first_frame * a.hop;
        s.last_sample = r.last_frame * a.hop + a.frame_len;
        out.push_back(s);
    }
    // Frame extents of neighbouring runs overlap when fewer than win/step
    // silent frames separate them; split at the centre of the silent gap.
    for (std::size_t k = 0; k + 1 < out.size(); ++k) {
        if (out[k].last_sample < out[k + 1].first_sample)
            continue;
        const std::size_t a_end = runs[k].last_frame, b_begin = runs[k + 1].first_frame;
        const std::size_t mid = (a_end + b_begin) * a.hop / 2 + a.frame_len / 2;
        out[k].last_sample = mid;
        out[k + 1].first_sample = mid + 1;
    }
    for (auto& s : out) {
        s.start_time = double(s.first_sample) / sample_rate;
        s.end_time = double(s.last_sample) / sample_rate;
    }
    return out;
}

inline std::vector<NonSilentSlice> segment_by_silence(const AudioSignal& sig,
                                                      const SegmenterConfig& cfg = {})
{
    const auto analysis = analyze_silence(sig, cfg);
    return slices_from_flags(analysis, sig.sample_rate, cfg.min_slice);
}

} // namespace sollu
