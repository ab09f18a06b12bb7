#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "audio.hpp"
#include "error.hpp"
#include "fft.hpp"
#include "filters.hpp"
#include "signatures.hpp"
#include "strings.hpp"

namespace sollu {

enum class TempoMethod { comb, lcs };

inline std::string_view to_string(TempoMethod m) { return m == TempoMethod::comb ? "comb" : "lcs"; }

struct TempoEstimate {
    double period = 0.0;
    TempoMethod method = TempoMethod::comb;
    double bpm = 0.0;
    std::vector<double> per_gap_estimates;
    std::vector<double> beat_times;
    std::vector<std::pair<int, double>> band_energies; // bpm -> energy summed over bands
};

struct CombConfig {
    int bpm_min = 33;
    int bpm_max = 75;
    std::vector<double> band_edges = {0.0, 900.0, 2600.0, 22100.0};
    int filter_order = 4;
    double envelope_rate = 200.0;
    double hann_half = 0.4;
    double diff_lag = 0.05;
    int train_pulses = 3;
};

class TempoError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::vector<double> band_filter(std::span<const double> x, double lo, double hi, double fs,
                                       int order)
{
    std::vector<double> y(x.begin(), x.end());
    const double nyq = fs / 2.0;
    if (lo > 0.0)
        apply_cascade(butterworth(FilterKind::highpass, order, lo, fs), y);
    if (hi < nyq)
        apply_cascade(butterworth(FilterKind::lowpass, order, hi, fs), y);
    return y;
}

// Mean of |x| over consecutive blocks of fs/rate samples.
inline std::vector<double> rectify_decimate(std::span<const double> x, double fs, double rate)
{
    const double step = fs / rate;
    const auto blocks = std::size_t(double(x.size()) / step);
    std::vector<double> out(blocks);
    for (std::size_t k = 0; k < blocks; ++k) {
        const auto a = std::size_t(std::llround(double(k) * step));
        const auto b = std::min(x.size(), std::size_t(std::llround(double(k + 1) * step)));
        double s = 0.0;
        for (std::size_t i = a; i < b; ++i)
            s += std::abs(x[i]);
        out[k] = b > a ? s / double(b - a) : 0.0;
    }
    return out;
}

} // namespace detail

// Per-band onset novelty at cfg.envelope_rate: rectified, smoothed by the
// decaying half of a Hann window, differenced over diff_lag and half-wave
// rectified.
inline std::vector<std::vector<double>> band_novelty(const AudioSignal& sig, const CombConfig& cfg = {})
{
    const std::size_t hann_len =
        std::max<std::size_t>(2, std::size_t(std::llround(cfg.hann_half * cfg.envelope_rate)));
    std::vector<double> hann(hann_len);
    for (std::size_t n = 0; n < hann_len; ++n)
        hann[n] = 0.5 * (1.0 + std::cos(std::numbers::pi * double(n) / double(hann_len)));
    const auto lag = std::max<std::size_t>(1, std::size_t(std::llround(cfg.diff_lag * cfg.envelope_rate)));

    std::vector<std::vector<double>> out;
    for (std::size_t b = 0; b + 1 < cfg.band_edges.size(); ++b) {
        const double lo = cfg.band_edges[b], hi = cfg.band_edges[b + 1];
        if (lo >= sig.sample_rate / 2.0)
            continue;
        const auto band = detail::band_filter(sig.samples, lo, hi, sig.sample_rate, cfg.filter_order);
        const auto env = detail::rectify_decimate(band, sig.sample_rate, cfg.envelope_rate);
        auto smooth = fft_convolve(env, hann);
        smooth.resize(env.size());
        std::vector<double> nov(smooth.size(), 0.0);
        for (std::size_t n = lag; n < smooth.size(); ++n)
            nov[n] = std::max(0.0, smooth[n] - smooth[n - lag]);
        out.push_back(std::move(nov));
    }
    return out;
}

inline TempoEstimate comb_tempo(const AudioSignal& sig, const CombConfig& cfg = {})
{
    if (cfg.bpm_min < 1 || cfg.bpm_max < cfg.bpm_min)
        throw TempoError("invalid bpm range");
    const double min_len = 2.0 * 60.0 / double(cfg.bpm_min);
    if (sig.duration() < min_len)
        throw TempoError("signal too short for comb tempo (" + format_fixed(sig.duration(), 2) +
                         " s < " + format_fixed(min_len, 2) + " s)");
    const auto bands = band_novelty(sig, cfg);

    TempoEstimate est;
    est.method = TempoMethod::comb;
    double best = 0.0;
    int best_bpm = 0;
    for (int bpm = cfg.bpm_min; bpm <= cfg.bpm_max; ++bpm) {
        const double period = 60.0 / double(bpm) * cfg.envelope_rate;
        std::vector<double> train(std::size_t(std::llround(period * (cfg.train_pulses - 1))) + 1, 0.0);
        for (int k = 0; k < cfg.train_pulses; ++k)
            train[std::size_t(std::llround(period * k))] = 1.0;
        double energy = 0.0;
        for (const auto& nov : bands)
            for (double y : fft_convolve(nov, train))
                energy += y * y;
        est.band_energies.emplace_back(bpm, energy);
        if (energy > best) {
            best = energy;
            best_bpm = bpm;
        }
    }
    if (best_bpm == 0 || !(best > 0.0))
        throw TempoError("no periodicity");
    // A flat energy curve carries no tempo information either.
    const auto [mn, mx] = std::minmax_element(
        est.band_energies.begin(), est.band_energies.end(),
        [](const auto& a, const auto& b) { return a.second < b.second; });
    if (mx->second - mn->second <= 1e-12 * mx->second)
        throw TempoError("no periodicity");
    est.bpm = best_bpm;
    est.period = 60.0 / double(best_bpm);
    return est;
}

inline double median(std::vector<double> v)
{
    if (v.empty())
        throw Error("median of empty sequence");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

class LcsTooShort : public TempoError {
public:
    LcsTooShort() : TempoError("LCS too short") {}
};

// Uses the first maximal match: lowest position in the signal, then in the
// pattern.
inline TempoEstimate lcs_tempo(const SignalSignature& ss, const SollukattuSignature& pattern)
{
    const auto gamma = ss.string_view();
    const auto where = ss.string_positions();
    const auto zeta = pattern.bols();
    const auto types = pattern.bol_beat_types();
    const auto lcs = longest_common_substring(gamma, zeta);
    if (lcs.length == 0)
        throw LcsTooShort();
    const auto m = lcs.matches.front();

    TempoEstimate est;
    est.method = TempoMethod::lcs;
    for (std::size_t t = 0; t < lcs.length; ++t)
        if (types[m.pos_b + t] == BeatType::B)
            est.beat_times.push_back(ss.events[where[m.pos_a + t]].tau_s);
    if (est.beat_times.size() < 2)
        throw LcsTooShort();
    for (std::size_t i = 1; i < est.beat_times.size(); ++i)
        est.per_gap_estimates.push_back(est.beat_times[i] - est.beat_times[i - 1]);
    est.period = median(est.per_gap_estimates);
    return est;
}

struct TempoSelection {
    TempoEstimate estimate;
    std::vector<std::string> warnings;
};

inline TempoSelection select_tempo(const std::optional<TempoEstimate>& comb,
                                   const std::optional<TempoEstimate>& lcs,
                                   double divergence = 2.0)
{
    TempoSelection out;
    if (lcs) {
        out.estimate = *lcs;
        if (comb && comb->period > 0.0 && lcs->period > 0.0) {
            const double r = std::max(comb->period, lcs->period) / std::min(comb->period, lcs->period);
            if (r > divergence)
                out.warnings.push_back("comb and LCS periods differ by " + format_fixed(r, 2) +
                                       "x; possible half/double period");
        }
        return out;
    }
    if (comb) {
        out.estimate = *comb;
        return out;
    }
    throw TempoError("no tempo estimate available");
}

struct OnsetConfig {
    double min_gap = 0.3;
    double window = 1.0;
    double ratio = 1.5;
};

// Fallback 1-beat detector: peaks of the summed band novelty that dominate
// a +-min_gap neighbourhood and exceed ratio x the local mean.
inline std::vector<double> detect_onsets(const AudioSignal& sig, const CombConfig& cfg = {},
                                         const OnsetConfig& oc = {})
{
    const auto bands = band_novelty(sig, cfg);
    if (bands.empty())
        return {};
    std::vector<double> nov(bands.front().size(), 0.0);
    for (const auto& b : bands)
        for (std::size_t i = 0; i < nov.size(); ++i)
            nov[i] += b[i];
    const auto n = std::ptrdiff_t(nov.size());
    const auto gap = std::ptrdiff_t(std::llround(oc.min_gap * cfg.envelope_rate));
    const auto win = std::ptrdiff_t(std::llround(oc.window * cfg.envelope_rate));
    std::vector<double> prefix(nov.size() + 1, 0.0);
    for (std::size_t i = 0; i < nov.size(); ++i)
        prefix[i + 1] = prefix[i] + nov[i];
    std::vector<double> out;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (nov[std::size_t(i)] <= 0.0)
            continue;
        const auto a = std::max<std::ptrdiff_t>(0, i - win), b = std::min(n, i + win + 1);
        const double local = (prefix[std::size_t(b)] - prefix[std::size_t(a)]) / double(b - a);
        if (nov[std::size_t(i)] < oc.ratio * local)
            continue;
        bool peak = true;
        for (auto j = std::max<std::ptrdiff_t>(0, i - gap); j < std::min(n, i + gap + 1) && peak; ++j)
            peak = j == i || nov[std::size_t(j)] < nov[std::size_t(i)] ||
                   (nov[std::size_t(j)] == nov[std::size_t(i)] && j > i);
        if (peak)
            out.push_back(double(i) / cfg.envelope_rate);
    }
    return out;
}

} // namespace sollu
