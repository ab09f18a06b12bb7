#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bol.hpp"
#include "error.hpp"
#include "io.hpp"
#include "signatures.hpp"

namespace sollu {

// One row of a beat annotation, either marked or ground truth.
struct BeatRow {
    std::size_t event_id = 0;
    Bol bol = Bol::unknown;
    double tau_s = 0.0;
    double tau_e = 0.0;
    BeatType type = BeatType::B;

    friend bool operator==(const BeatRow&, const BeatRow&) = default;
};

using MarkedBeat = BeatRow;
using AnnotationRecord = BeatRow;

struct DetectedBeats {
    std::vector<double> timestamps;

    void validate() const
    {
        for (std::size_t i = 1; i < timestamps.size(); ++i)
            if (!(timestamps[i] > timestamps[i - 1]))
                throw Error("detected beats must be strictly increasing");
    }
};

struct BeatMarkConfig {
    double wide_lo = 0.25;        // wide(T) = [T - wide_lo, T + wide_hi]
    double wide_hi = 0.4;
    double long_gap_offset = 0.25; // long_gap(T) = 2T - offset
    double forced_length = 0.5;
    // k-means classes whose centroids differ by less than this factor are
    // treated as one (all high).
    double energy_collapse_ratio = 1.5;
};

inline constexpr bool in_wide(double gap, double T, const BeatMarkConfig& c = {})
{
    return gap >= T - c.wide_lo && gap <= T + c.wide_hi;
}

inline constexpr bool is_long_gap(double gap, double T, const BeatMarkConfig& c = {})
{
    return gap > 2.0 * T - c.long_gap_offset;
}

struct EnergySplit {
    double low_centroid = 0.0;
    double high_centroid = 0.0;
    bool collapsed = false;
};

// Two-means on raw slice energy, seeded at the extremes.
inline EnergySplit assign_energy_classes(std::span<BolEvent> events, double collapse_ratio = 1.5)
{
    EnergySplit out;
    if (events.empty())
        return out;
    const auto [mn, mx] = std::minmax_element(
        events.begin(), events.end(),
        [](const BolEvent& a, const BolEvent& b) { return a.raw_energy < b.raw_energy; });
    double lo = mn->raw_energy, hi = mx->raw_energy;
    if (!(hi > lo)) {
        for (auto& e : events)
            e.energy_class = EnergyClass::high;
        out = {lo, hi, true};
        return out;
    }
    std::vector<bool> is_high(events.size());
    for (int it = 0; it < 100; ++it) {
        bool changed = false;
        double s_lo = 0, s_hi = 0;
        std::size_t n_lo = 0, n_hi = 0;
        for (std::size_t i = 0; i < events.size(); ++i) {
            const double e = events[i].raw_energy;
            // ties go to the high class
            const bool h = std::abs(e - hi) <= std::abs(e - lo);
            changed |= h != is_high[i] || it == 0;
            is_high[i] = h;
            (h ? s_hi : s_lo) += e;
            ++(h ? n_hi : n_lo);
        }
        if (n_lo)
            lo = s_lo / double(n_lo);
        if (n_hi)
            hi = s_hi / double(n_hi);
        if (!changed)
            break;
    }
    out.low_centroid = lo;
    out.high_centroid = hi;
    out.collapsed = lo > 0.0 && hi < collapse_ratio * lo;
    for (std::size_t i = 0; i < events.size(); ++i)
        events[i].energy_class =
            out.collapsed || is_high[i] ? EnergyClass::high : EnergyClass::low;
    return out;
}

inline std::vector<BolEvent> energy_classes(std::vector<BolEvent> events, double collapse_ratio = 1.5)
{
    assign_energy_classes(events, collapse_ratio);
    return events;
}

// ob[q] is true when some detected beat lies in [tau_s, tau_e] of event q.
inline std::vector<bool> overlap_beats(std::span<const double> db, std::span<const BolEvent> ss)
{
    std::vector<bool> ob(ss.size(), false);
    std::size_t p = 0, q = 0;
    while (p < db.size() && q < ss.size()) {
        if (db[p] < ss[q].tau_s) {
            ++p;
        } else {
            ob[q] = db[p] <= ss[q].tau_e;
            ++q;
        }
    }
    return ob;
}

inline std::vector<MarkedBeat> mark_beats(std::span<const double> db, std::span<const BolEvent> ss,
                                          double T, const BeatMarkConfig& cfg = {})
{
    if (ss.empty())
        throw Error("beat marking needs a non-empty signal signature");
    if (!(2.0 * T - cfg.long_gap_offset > T + cfg.wide_hi) || !(T - cfg.wide_lo > 0.0))
        throw Error("tempo period too small for beat marking");
    const auto ob = overlap_beats(db, ss);
    std::vector<MarkedBeat> mb;
    auto emit = [&](Bol bol, double s, double e, BeatType t) {
        if (bol == Bol::stick)
            t = BeatType::Stick;
        mb.push_back({mb.size() + 1, bol, s, e, t});
    };

    emit(ss[0].bol, ss[0].tau_s, ss[0].tau_e, BeatType::B);
    double last_beat = ss[0].tau_s;
    std::size_t i = 0;
    while (i + 1 < ss.size()) {
        const auto& e = ss[i + 1];
        const double gap = e.tau_s - last_beat;
        if (in_wide(gap, T, cfg)) {
            if (e.energy_class != EnergyClass::low)
                emit(e.bol, e.tau_s, e.tau_e, BeatType::B);
            else if (ob[i + 1])
                emit(Bol::stick, e.tau_s, e.tau_e, BeatType::Stick);
            else
                emit(e.bol, e.tau_s, e.tau_e, BeatType::Undef);
            last_beat = e.tau_s;
            ++i;
        } else if (gap < T - cfg.wide_lo) {
            emit(e.bol, e.tau_s, e.tau_e, BeatType::HB);
            ++i;
        } else if (is_long_gap(gap, T, cfg)) {
            emit(Bol::stick, last_beat + T, last_beat + T + cfg.forced_length, BeatType::Stick);
            last_beat += T;
        } else {
            // (T + wide_hi, long_gap(T)]: neither a beat nor a missed beat
            emit(e.bol, e.tau_s, e.tau_e, BeatType::Undef);
            last_beat = e.tau_s;
            ++i;
        }
    }
    return mb;
}

struct MatchScores {
    double time = 0.0, bol = 0.0, event = 0.0; // percentages of |AB|
    std::size_t time_matches = 0, bol_matches = 0, event_matches = 0, total = 0;
};

inline MatchScores evaluate(std::span<const MarkedBeat> mb, std::span<const AnnotationRecord> ab)
{
    if (ab.empty())
        throw Error("evaluation needs a non-empty annotation");
    auto by_time = [](const BeatRow& a, const BeatRow& b) {
        if (a.tau_s != b.tau_s)
            return a.tau_s < b.tau_s;
        if (a.tau_e != b.tau_e)
            return a.tau_e < b.tau_e;
        if (a.bol != b.bol)
            return a.bol < b.bol;
        return a.type < b.type;
    };
    std::vector<BeatRow> m(mb.begin(), mb.end()), a(ab.begin(), ab.end());
    std::sort(m.begin(), m.end(), by_time);
    std::sort(a.begin(), a.end(), by_time);
    std::vector<bool> used(m.size(), false);
    MatchScores s;
    s.total = a.size();
    for (const auto& row : a) {
        for (std::size_t k = 0; k < m.size(); ++k) {
            if (used[k] || m[k].tau_s > row.tau_e || row.tau_s > m[k].tau_e)
                continue;
            used[k] = true;
            ++s.time_matches;
            s.bol_matches += m[k].bol == row.bol;
            s.event_matches += m[k].type == row.type;
            break;
        }
    }
    const double n = double(s.total);
    s.time = 100.0 * double(s.time_matches) / n;
    s.bol = 100.0 * double(s.bol_matches) / n;
    s.event = 100.0 * double(s.event_matches) / n;
    return s;
}

inline void write_annotation_csv(std::ostream& out, std::span<const BeatRow> rows)
{
    out << "event_id,bol_label,bol_code,tau_s,tau_e,beat_type\n";
    for (const auto& r : rows)
        out << r.event_id << ',' << label(r.bol) << ',' << code(r.bol) << ','
            << format_fixed(r.tau_s, 3) << ',' << format_fixed(r.tau_e, 3) << ','
            << to_string(r.type) << '\n';
}

inline std::string annotation_csv(std::span<const BeatRow> rows)
{
    std::ostringstream ss;
    write_annotation_csv(ss, rows);
    return ss.str();
}

inline std::vector<BeatRow> read_annotation_csv(std::istream& in)
{
    std::vector<BeatRow> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty() || (lineno == 1 && line.rfind("event_id", 0) == 0))
            continue;
        const auto f = split(line, ',');
        if (f.size() != 6)
            throw Error("annotation line " + std::to_string(lineno) + ": expected 6 columns");
        BeatRow r;
        try {
            r.event_id = std::size_t(parse_int(f[0]));
            const auto bol = bol_from_code(int(parse_int(f[2])));
            if (!bol)
                throw Error("bad bol code");
            r.bol = *bol;
            r.tau_s = parse_double(f[3]);
            r.tau_e = parse_double(f[4]);
            const auto t = beat_type_from_string(f[5]);
            if (!t)
                throw Error("bad beat type '" + f[5] + "'");
            r.type = *t;
        } catch (const Error& e) {
            throw Error("annotation line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!(r.tau_s <= r.tau_e))
            throw Error("annotation line " + std::to_string(lineno) + ": tau_s > tau_e");
        rows.push_back(r);
    }
    return rows;
}

inline std::vector<BeatRow> load_annotation(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open annotation " + path.string());
    return read_annotation_csv(in);
}

// One timestamp per line; '#' starts a comment.
inline DetectedBeats read_detected_beats(std::istream& in)
{
    DetectedBeats db;
    for (std::string line; std::getline(in, line);) {
        const auto body = trim(std::string_view(line).substr(0, line.find('#')));
        if (!body.empty())
            db.timestamps.push_back(parse_double(body));
    }
    db.validate();
    return db;
}

inline DetectedBeats load_detected_beats(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open beat file " + path.string());
    return read_detected_beats(in);
}

inline std::string detected_beats_text(const DetectedBeats& db)
{
    std::string out;
    for (double t : db.timestamps)
        out += format_exact(t) + "\n";
    return out;
}

} // namespace sollu
