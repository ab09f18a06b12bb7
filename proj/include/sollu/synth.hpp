#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "audio.hpp"
#include "beatmark.hpp"
#include "filters.hpp"
#include "gmm.hpp"
#include "signatures.hpp"

namespace sollu {

// Harmonic vowel recipe, all energy below 900 Hz.
struct Timbre {
    double f0 = 110.0;
    double formant1 = 300.0;
    double formant2 = 700.0;
    double bandwidth = 70.0;
    double glide = 0.0; // relative f0 change over the burst
};

// Distinct per-class recipes spread by golden-ratio sequences.
inline Timbre default_timbre(Bol b)
{
    const double c = double(code(b));
    auto frac = [](double x) { return x - std::floor(x); };
    Timbre t;
    t.f0 = 85.0 + 50.0 * frac(c * 0.7548776662);
    t.formant1 = 140.0 + 320.0 * frac(c * 0.6180339887);
    t.formant2 = 480.0 + 380.0 * frac(c * 0.5698402910 + 0.31);
    t.glide = 0.3 * (frac(c * 0.4142135624) - 0.5);
    return t;
}

struct SynthSpec {
    SollukattuSignature pattern;
    double period = 1.2;
    std::size_t bars = 2;
    double jitter = 0.0;
    double sample_rate = 44100.0;
    std::map<Bol, Timbre> timbres; // overrides default_timbre
    double strike_lo = 900.0;
    double strike_hi = 2600.0;
    double vocal_amp = 0.45;
    double strike_amp = 0.3;
    double half_strike_scale = 0.35;
    double vocal_dur = 0.25;
    double strike_dur = 0.15;
    double amp_jitter = 0.05;
    double lead_in = 0.5;
    double tail = 0.5;
    double min_silence = 0.1;
};

struct SynthResult {
    AudioSignal audio;
    std::vector<AnnotationRecord> annotation;
    DetectedBeats beats;
};

namespace detail {

inline void add_vowel(std::vector<double>& out, std::size_t at, const Timbre& t, double amp,
                      double dur, double fs, std::mt19937_64& rng)
{
    const std::size_t n = std::size_t(dur * fs);
    std::vector<double> gains;
    for (int h = 1; h * t.f0 * (1.0 + std::max(0.0, t.glide)) < 880.0; ++h) {
        const double f = h * t.f0;
        auto res = [&](double F) { return 1.0 / (1.0 + std::pow((f - F) / t.bandwidth, 2)); };
        gains.push_back(res(t.formant1) + 0.8 * res(t.formant2) + 0.02);
    }
    double norm = 0.0;
    for (double g : gains)
        norm += g * g;
    norm = std::sqrt(norm);
    std::vector<double> phase(gains.size());
    for (auto& p : phase)
        p = 2.0 * std::numbers::pi * unit(rng);
    const std::size_t attack = std::size_t(0.01 * fs), release = std::size_t(0.4 * double(n));
    double acc_phase = 0.0;
    for (std::size_t i = 0; i < n && at + i < out.size(); ++i) {
        const double tt = double(i) / fs;
        const double f0 = t.f0 * (1.0 + t.glide * tt / dur);
        acc_phase += 2.0 * std::numbers::pi * f0 / fs;
        double env = 1.0;
        if (i < attack)
            env = double(i) / double(attack);
        else if (i + release > n)
            env = 0.5 * (1.0 - std::cos(std::numbers::pi * double(n - i) / double(release)));
        double v = 0.0;
        for (std::size_t h = 0; h < gains.size(); ++h)
            v += gains[h] * std::sin(double(h + 1) * acc_phase + phase[h]);
        out[at + i] += amp * env * v / norm * std::numbers::sqrt2;
    }
}

inline void add_strike(std::vector<double>& out, std::size_t at, double amp, double dur, double lo,
                       double hi, double fs, std::mt19937_64& rng)
{
    const std::size_t pre = std::size_t(0.02 * fs), n = std::size_t(dur * fs);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x(pre + n);
    for (auto& v : x)
        v = g(rng);
    apply_cascade(butterworth(FilterKind::highpass, 4, lo, fs), x);
    apply_cascade(butterworth(FilterKind::lowpass, 4, hi, fs), x);
    double rms = 0.0;
    for (std::size_t i = pre; i < x.size(); ++i)
        rms += x[i] * x[i];
    rms = std::sqrt(rms / double(n));
    const std::size_t fade = std::size_t(0.01 * fs);
    for (std::size_t i = 0; i < n && at + i < out.size(); ++i) {
        double env = std::exp(-double(i) / (0.05 * fs));
        if (i + fade > n)
            env *= double(n - i) / double(fade);
        out[at + i] += amp * env * x[pre + i] / rms;
    }
}

} // namespace detail

class SynthError : public Error {
public:
    using Error::Error;
};

struct RenderEvent {
    Bol bol = Bol::unknown; // Bol::stick renders the strike alone
    BeatType type = BeatType::B;
    double onset = 0.0;
};

// Renders events in time order; `end` is the signal length in seconds.
inline SynthResult render_events(std::span<const RenderEvent> events, double end,
                                 const SynthSpec& spec, std::mt19937_64& rng)
{
    const double fs = spec.sample_rate;
    SynthResult res;
    res.audio.sample_rate = fs;
    res.audio.samples.assign(std::size_t(std::ceil(end * fs)), 0.0);
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& ev = events[i];
        const bool stick = ev.bol == Bol::stick;
        const double dur = stick ? spec.strike_dur : spec.vocal_dur;
        if (i + 1 < events.size() && events[i + 1].onset - (ev.onset + dur) < spec.min_silence)
            throw SynthError("renders overlap: tempo period too small for the burst length");
        const auto at = std::size_t(std::llround(ev.onset * fs));
        const double gain = 1.0 + spec.amp_jitter * (2.0 * detail::unit(rng) - 1.0);
        const bool half = ev.type == BeatType::HB || ev.type == BeatType::QB;
        detail::add_strike(res.audio.samples, at,
                           gain * spec.strike_amp * (half ? spec.half_strike_scale : 1.0),
                           spec.strike_dur, spec.strike_lo, spec.strike_hi, fs, rng);
        if (!stick) {
            const auto it = spec.timbres.find(ev.bol);
            const Timbre tb = it != spec.timbres.end() ? it->second : default_timbre(ev.bol);
            detail::add_vowel(res.audio.samples, at, tb, gain * spec.vocal_amp, spec.vocal_dur, fs, rng);
        }
        const double t0 = double(at) / fs;
        res.annotation.push_back({i + 1, ev.bol, t0, t0 + dur, ev.type});
        if (ev.type == BeatType::B || ev.type == BeatType::Stick)
            res.beats.timestamps.push_back(t0);
    }
    for (auto& v : res.audio.samples)
        v = std::clamp(v, -1.0, 1.0);
    return res;
}

inline SynthResult synthesize(const SynthSpec& spec, std::uint64_t seed)
{
    if (!(spec.period >= 0.8 && spec.period <= 1.8))
        throw SynthError("tempo period must lie in [0.8, 1.8] s");
    if (!(spec.jitter >= 0.0 && spec.jitter < 0.1))
        throw SynthError("jitter must lie in [0, 0.1)");
    if (spec.pattern.slots.empty() || spec.bars == 0)
        throw SynthError("empty pattern");
    std::mt19937_64 rng(seed);
    const std::size_t beats = spec.bars * std::size_t(spec.pattern.lambda);
    const std::size_t cycle = spec.pattern.beats();

    std::vector<double> onset(beats + 1);
    onset[0] = spec.lead_in;
    for (std::size_t k = 0; k < beats; ++k)
        onset[k + 1] = onset[k] + spec.period * (1.0 + spec.jitter * (2.0 * detail::unit(rng) - 1.0));

    std::vector<RenderEvent> events;
    for (std::size_t k = 0; k < beats; ++k)
        for (const auto& s : spec.pattern.slots)
            if (s.beat == k % cycle)
                events.push_back({s.bol, s.type, onset[k] + s.offset * (onset[k + 1] - onset[k])});
    return render_events(events, onset[beats] + spec.tail, spec, rng);
}

struct ClickSpec {
    double bpm = 60.0;
    double duration = 20.0;
    double jitter = 0.0; // relative inter-onset jitter
    double sample_rate = 44100.0;
    double band_lo = 0.0; // 0/0 renders single-sample impulses
    double band_hi = 0.0;
    double click_len = 0.02;
    double amplitude = 0.8;
    double lead_in = 0.25;
};

inline AudioSignal click_train(const ClickSpec& c, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    AudioSignal sig;
    sig.sample_rate = c.sample_rate;
    sig.samples.assign(std::size_t(c.duration * c.sample_rate), 0.0);
    const double period = 60.0 / c.bpm;
    for (double t = c.lead_in; t < c.duration - c.click_len;
         t += period * (1.0 + c.jitter * (2.0 * detail::unit(rng) - 1.0))) {
        const auto at = std::size_t(std::llround(t * c.sample_rate));
        if (c.band_hi > c.band_lo)
            detail::add_strike(sig.samples, at, c.amplitude, c.click_len, c.band_lo, c.band_hi,
                               c.sample_rate, rng);
        else
            sig.samples[at] = c.amplitude;
    }
    for (auto& v : sig.samples)
        v = std::clamp(v, -1.0, 1.0);
    return sig;
}

} // namespace sollu
