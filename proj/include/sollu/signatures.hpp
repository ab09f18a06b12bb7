#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <istream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "audio.hpp"
#include "bol.hpp"
#include "error.hpp"
#include "features.hpp"
#include "gmm.hpp"
#include "io.hpp"
#include "segmenter.hpp"
#include "strings.hpp"

namespace sollu {

enum class EnergyClass : std::uint8_t { unset, high, low };

struct BolEvent {
    Bol bol = Bol::unknown;
    double tau_s = 0.0;
    double tau_e = 0.0;
    EnergyClass energy_class = EnergyClass::unset;
    double raw_energy = 0.0;
    double score = 0.0;

    // Dropped from the string view: unrecognized slices and sticks.
    bool dropped() const { return !is_syllable(bol); }
};

struct SignalSignature {
    std::vector<BolEvent> events;

    std::vector<Bol> string_view() const
    {
        std::vector<Bol> out;
        for (const auto& e : events)
            if (!e.dropped())
                out.push_back(e.bol);
        return out;
    }

    // events index of each string-view position
    std::vector<std::size_t> string_positions() const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < events.size(); ++i)
            if (!events[i].dropped())
                out.push_back(i);
        return out;
    }
};

struct PatternSlot {
    Bol bol = Bol::unknown; // Bol::stick for a beat without a syllable
    BeatType type = BeatType::B;
    std::size_t beat = 0;
    double offset = 0.0; // fraction of the tempo period after the beat
};

struct SollukattuSignature {
    std::string name;
    int lambda = 8;
    int recurrence = 8;
    int bars = 1;
    std::vector<PatternSlot> slots;

    std::size_t beats() const { return std::size_t(lambda) * std::size_t(bars); }

    std::vector<Bol> bols() const
    {
        std::vector<Bol> out;
        for (const auto& s : slots)
            if (s.bol != Bol::stick)
                out.push_back(s.bol);
        return out;
    }

    std::vector<BeatType> beat_types() const
    {
        std::vector<BeatType> out;
        for (const auto& s : slots)
            out.push_back(s.type);
        return out;
    }

    // parallel to bols()
    std::vector<BeatType> bol_beat_types() const
    {
        std::vector<BeatType> out;
        for (const auto& s : slots)
            if (s.bol != Bol::stick)
                out.push_back(s.type);
        return out;
    }
};

class DictionaryError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::vector<PatternSlot> parse_pattern(std::string_view text, const std::string& name)
{
    std::vector<PatternSlot> slots;
    std::size_t beat = 0, pos = 0;
    auto fail = [&](const std::string& why) -> DictionaryError {
        return DictionaryError(name + ": " + why);
    };
    while (true) {
        pos = text.find_first_not_of(" \t", pos);
        if (pos == std::string_view::npos)
            break;
        if (text[pos] != '[')
            throw fail("expected '[' in pattern");
        const auto close = text.find(']', pos);
        if (close == std::string_view::npos)
            throw fail("unterminated '['");
        std::istringstream group{std::string(text.substr(pos + 1, close - pos - 1))};
        std::vector<std::pair<std::string, std::string>> toks;
        for (std::string tok; group >> tok;) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos)
                toks.emplace_back(tok, "");
            else
                toks.emplace_back(tok.substr(0, colon), tok.substr(colon + 1));
        }
        if (toks.empty() || toks.size() > 4)
            throw fail("a beat holds between 1 and 4 tokens");

        bool seen_hb = false;
        for (std::size_t i = 0; i < toks.size(); ++i) {
            const auto& [word, tag] = toks[i];
            const auto bol = bol_from_label(word);
            if (!bol || *bol == Bol::unknown)
                throw fail("unknown bol '" + word + "'");
            BeatType type;
            if (!tag.empty()) {
                const auto t = beat_type_from_string(tag);
                if (!t || *t == BeatType::Undef)
                    throw fail("bad beat-type tag '" + tag + "'");
                type = *t;
            } else if (i == 0) {
                type = *bol == Bol::stick ? BeatType::Stick : BeatType::B;
            } else if (toks.size() == 2) {
                type = BeatType::HB;
            } else if (toks.size() == 4) {
                type = i == 2 ? BeatType::HB : BeatType::QB;
            } else {
                throw fail("three-token beat needs explicit tags");
            }
            if ((type == BeatType::Stick) != (*bol == Bol::stick))
                throw fail("stick tag and stick bol must go together");
            if ((i == 0) != (type == BeatType::B || type == BeatType::Stick))
                throw fail("each beat starts with its 1-beat or stick");
            double offset = 0.0;
            if (type == BeatType::HB) {
                offset = 0.5;
                seen_hb = true;
            } else if (type == BeatType::QB) {
                offset = seen_hb ? 0.75 : 0.25;
            }
            slots.push_back({*bol, type, beat, offset});
        }
        ++beat;
        pos = close + 1;
    }
    return slots;
}

} // namespace detail

// `name | lambda | recurrence | p | [bol:TAG ...] ...` or `name | lambda | pattern`.
inline SollukattuSignature parse_signature_record(std::string_view line)
{
    const auto fields = split(line, '|');
    if (fields.size() != 3 && fields.size() != 5)
        throw DictionaryError("expected 3 or 5 '|'-separated fields: " + std::string(line));
    SollukattuSignature s;
    s.name = fields[0];
    if (s.name.empty())
        throw DictionaryError("empty pattern name");
    try {
        s.lambda = int(parse_int(fields[1]));
        s.recurrence = fields.size() == 5 ? int(parse_int(fields[2])) : s.lambda;
        s.bars = fields.size() == 5 ? int(parse_int(fields[3])) : 1;
    } catch (const Error& e) {
        throw DictionaryError(s.name + ": " + e.what());
    }
    if (s.lambda != 6 && s.lambda != 8)
        throw DictionaryError(s.name + ": lambda must be 6 or 8");
    if (s.recurrence != 6 && s.recurrence != 8)
        throw DictionaryError(s.name + ": recurrence must be 6 or 8");
    if (s.bars < 1)
        throw DictionaryError(s.name + ": p must be positive");
    s.slots = detail::parse_pattern(fields.back(), s.name);
    const std::size_t beats = s.slots.empty() ? 0 : s.slots.back().beat + 1;
    if (beats != s.beats())
        throw DictionaryError(s.name + ": pattern has " + std::to_string(beats) +
                              " beats, expected " + std::to_string(s.beats()));
    if (s.bols().empty())
        throw DictionaryError(s.name + ": pattern has no bols");
    return s;
}

inline std::string format_signature_record(const SollukattuSignature& s)
{
    std::string out = s.name + " | " + std::to_string(s.lambda) + " | " +
                      std::to_string(s.recurrence) + " | " + std::to_string(s.bars) + " |";
    for (std::size_t i = 0; i < s.slots.size(); ++i) {
        const auto& sl = s.slots[i];
        const bool open = i == 0 || s.slots[i - 1].beat != sl.beat;
        const bool close = i + 1 == s.slots.size() || s.slots[i + 1].beat != sl.beat;
        out += open ? " [" : " ";
        if (sl.bol == Bol::stick)
            out += "_";
        else
            out += std::string(label(sl.bol)) + ":" + std::string(to_string(sl.type));
        if (close)
            out += "]";
    }
    return out;
}

inline std::vector<SollukattuSignature> parse_dictionary(std::istream& in)
{
    std::vector<SollukattuSignature> dict;
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        auto body = trim(std::string_view(line).substr(0, line.find('#')));
        if (body.empty())
            continue;
        try {
            dict.push_back(parse_signature_record(body));
        } catch (const DictionaryError& e) {
            throw DictionaryError("line " + std::to_string(lineno) + ": " + e.what());
        }
        for (std::size_t i = 0; i + 1 < dict.size(); ++i)
            if (dict[i].name == dict.back().name)
                throw DictionaryError("line " + std::to_string(lineno) + ": duplicate name " +
                                      dict.back().name);
    }
    return dict;
}

inline std::vector<SollukattuSignature> load_dictionary(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DictionaryError("cannot open dictionary " + path.string());
    return parse_dictionary(in);
}

inline const SollukattuSignature& find_signature(std::span<const SollukattuSignature> dict,
                                                 std::string_view name)
{
    for (const auto& s : dict)
        if (s.name == name)
            return s;
    throw DictionaryError("no pattern named " + std::string(name));
}

template <class T>
std::vector<T> extend_signature(std::span<const T> zeta, std::size_t k)
{
    if (zeta.empty())
        throw Error("cannot extend an empty signature");
    std::vector<T> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        out.push_back(zeta[i % zeta.size()]);
    return out;
}

inline std::vector<Bol> extend_signature(const SollukattuSignature& s, std::size_t k)
{
    const auto z = s.bols();
    return extend_signature<Bol>(z, k);
}

struct RecognitionEntry {
    std::string name;
    std::size_t distance = 0;
};

struct Recognition {
    std::string name;
    std::size_t distance = 0;
    std::vector<RecognitionEntry> table; // ascending distance, then name
    std::vector<std::string> ties;       // every name at the minimum when more than one
};

class NoRecognizedBols : public Error {
public:
    NoRecognizedBols() : Error("no recognized bols") {}
};

inline Recognition recognize_sollukattu(std::span<const Bol> gamma,
                                        std::span<const SollukattuSignature> dict)
{
    if (gamma.empty())
        throw NoRecognizedBols();
    if (dict.empty())
        throw Error("empty dictionary");
    Recognition out;
    for (const auto& s : dict)
        out.table.push_back({s.name, levenshtein(gamma, extend_signature(s, gamma.size()))});
    std::sort(out.table.begin(), out.table.end(), [](const auto& a, const auto& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.name < b.name;
    });
    out.name = out.table.front().name;
    out.distance = out.table.front().distance;
    for (const auto& e : out.table)
        if (e.distance == out.distance)
            out.ties.push_back(e.name);
    if (out.ties.size() < 2)
        out.ties.clear();
    return out;
}

inline Recognition recognize_sollukattu(const SignalSignature& ss,
                                        std::span<const SollukattuSignature> dict)
{
    const auto g = ss.string_view();
    return recognize_sollukattu(std::span<const Bol>(g), dict);
}

inline double slice_energy(const AudioSignal& sig, const NonSilentSlice& s)
{
    const std::size_t last = std::min(s.last_sample, sig.size());
    const std::size_t first = std::min(s.first_sample, last);
    return frame_energy(std::span<const double>(sig.samples).subspan(first, last - first));
}

// `classify_slice(audio, slice)` returns {bol, score}.
template <class Classifier>
SignalSignature build_signal_signature(const AudioSignal& sig,
                                       std::span<const NonSilentSlice> slices,
                                       Classifier&& classify_slice)
{
    SignalSignature ss;
    ss.events.reserve(slices.size());
    for (const auto& s : slices) {
        BolEvent e;
        const auto [bol, score] = classify_slice(sig, s);
        e.bol = bol;
        e.score = score;
        e.tau_s = s.start_time;
        e.tau_e = s.end_time;
        e.raw_energy = slice_energy(sig, s);
        ss.events.push_back(e);
    }
    return ss;
}

// Slices shorter than one MFCC frame, or scoring below `reject_below` per
// frame, come back unrecognized.
inline SignalSignature build_signal_signature(const AudioSignal& sig,
                                              std::span<const NonSilentSlice> slices,
                                              const GmmModel& model, const MfccConfig& mfcc_cfg = {},
                                              double reject_below = -std::numeric_limits<double>::infinity())
{
    const MfccExtractor mfcc(sig.sample_rate, mfcc_cfg);
    return build_signal_signature(sig, slices, [&](const AudioSignal& a, const NonSilentSlice& s) {
        FeatureSequence fs;
        try {
            fs = mfcc.compute(a, s);
        } catch (const SliceTooShort&) {
            return std::pair{Bol::unknown, -std::numeric_limits<double>::infinity()};
        }
        const auto c = classify(model, fs);
        if (c.score / double(fs.vectors.size()) < reject_below)
            return std::pair{Bol::unknown, c.score};
        return std::pair{c.bol, c.score};
    });
}

} // namespace sollu
