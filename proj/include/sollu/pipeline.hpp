#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "audio.hpp"
#include "beatmark.hpp"
#include "features.hpp"
#include "gmm.hpp"
#include "io.hpp"
#include "segmenter.hpp"
#include "signatures.hpp"
#include "tempo.hpp"

namespace sollu {

struct PipelineConfig {
    SegmenterConfig segmenter;
    MfccConfig mfcc;
    EmOptions em;
    std::uint64_t seed = 1;
    double reject_below = -std::numeric_limits<double>::infinity();
    CombConfig comb;
    double divergence = 2.0;
    BeatMarkConfig beatmark;
    OnsetConfig onset;

    void validate() const
    {
        auto need = [](bool ok, const char* what) {
            if (!ok)
                throw Error(std::string("invalid config: ") + what);
        };
        const auto& s = segmenter;
        need(s.win > 0 && s.step > 0 && s.step <= s.win, "segmenter win/step");
        need(s.weight >= 0, "segmenter weight");
        need(s.min_slice >= 0, "segmenter min_slice");
        need(s.bins >= 3, "segmenter bins");
        need(mfcc.frame > 0 && mfcc.hop > 0, "mfcc frame/hop");
        need(mfcc.preemphasis >= 0 && mfcc.preemphasis < 1, "mfcc preemphasis");
        need(mfcc.mel_filters >= kCepstra, "mfcc mel_filters");
        need(mfcc.low_hz >= 0 && (mfcc.high_hz == 0 || mfcc.high_hz > mfcc.low_hz), "mfcc band");
        need(mfcc.delta_window >= 1, "mfcc delta_window");
        need(mfcc.log_floor > 0, "mfcc log_floor");
        need(em.components >= 1, "gmm components");
        need(em.max_iter >= 1 && em.tol > 0, "gmm iteration limits");
        need(em.var_floor_ratio > 0, "gmm variance floor");
        need(comb.bpm_min >= 1 && comb.bpm_max >= comb.bpm_min, "comb bpm range");
        need(comb.band_edges.size() >= 2 &&
                 std::is_sorted(comb.band_edges.begin(), comb.band_edges.end()),
             "comb band edges");
        need(comb.filter_order >= 2 && comb.filter_order % 2 == 0, "comb filter order");
        need(comb.envelope_rate > 0 && comb.hann_half > 0 && comb.diff_lag > 0, "comb envelope");
        need(comb.train_pulses >= 2, "comb train pulses");
        need(divergence > 1, "tempo divergence");
        const auto& b = beatmark;
        need(b.wide_lo >= 0 && b.wide_hi >= 0 && b.long_gap_offset >= 0, "beatmark offsets");
        need(b.forced_length > 0, "beatmark forced length");
        need(b.energy_collapse_ratio >= 1, "beatmark energy collapse ratio");
        need(onset.min_gap > 0 && onset.window > 0 && onset.ratio > 0, "onset picker");
    }
};

inline nlohmann::json config_to_json(const PipelineConfig& c)
{
    nlohmann::json j;
    j["segmenter"] = {{"win", c.segmenter.win},
                      {"step", c.segmenter.step},
                      {"weight", c.segmenter.weight},
                      {"min_slice", c.segmenter.min_slice},
                      {"bins", c.segmenter.bins}};
    j["mfcc"] = {{"frame", c.mfcc.frame},
                 {"hop", c.mfcc.hop},
                 {"preemphasis", c.mfcc.preemphasis},
                 {"mel_filters", c.mfcc.mel_filters},
                 {"low_hz", c.mfcc.low_hz},
                 {"high_hz", c.mfcc.high_hz},
                 {"delta_window", c.mfcc.delta_window},
                 {"log_floor", c.mfcc.log_floor}};
    j["gmm"] = {{"components", c.em.components},
                {"max_iter", c.em.max_iter},
                {"tol", c.em.tol},
                {"var_floor_ratio", c.em.var_floor_ratio},
                {"kmeans_iter", c.em.kmeans_iter},
                {"seed", c.seed},
                {"reject_below", std::isfinite(c.reject_below) ? nlohmann::json(c.reject_below)
                                                                : nlohmann::json(nullptr)}};
    j["tempo"] = {{"bpm_min", c.comb.bpm_min},
                  {"bpm_max", c.comb.bpm_max},
                  {"band_edges", c.comb.band_edges},
                  {"filter_order", c.comb.filter_order},
                  {"envelope_rate", c.comb.envelope_rate},
                  {"hann_half", c.comb.hann_half},
                  {"diff_lag", c.comb.diff_lag},
                  {"train_pulses", c.comb.train_pulses},
                  {"divergence", c.divergence}};
    j["beatmark"] = {{"wide_lo", c.beatmark.wide_lo},
                     {"wide_hi", c.beatmark.wide_hi},
                     {"long_gap_offset", c.beatmark.long_gap_offset},
                     {"forced_length", c.beatmark.forced_length},
                     {"energy_collapse_ratio", c.beatmark.energy_collapse_ratio}};
    j["onset"] = {{"min_gap", c.onset.min_gap},
                  {"window", c.onset.window},
                  {"ratio", c.onset.ratio}};
    return j;
}

namespace detail {

template <class T>
void take(const nlohmann::json& obj, const char* key, T& dst)
{
    if (obj.contains(key))
        dst = obj.at(key).get<T>();
}

inline void only_keys(const nlohmann::json& obj, std::initializer_list<const char*> keys,
                      const std::string& where)
{
    if (!obj.is_object())
        throw Error("config section " + where + " must be an object");
    for (const auto& [k, v] : obj.items()) {
        bool known = false;
        for (const char* kk : keys)
            known |= k == kk;
        if (!known)
            throw Error("unknown config key " + where + "." + k);
    }
}

} // namespace detail

inline PipelineConfig config_from_json(const nlohmann::json& j)
{
    using detail::only_keys;
    using detail::take;
    PipelineConfig c;
    try {
        only_keys(j, {"segmenter", "mfcc", "gmm", "tempo", "beatmark", "onset"}, "root");
        if (j.contains("segmenter")) {
            const auto& s = j["segmenter"];
            only_keys(s, {"win", "step", "weight", "min_slice", "bins"}, "segmenter");
            take(s, "win", c.segmenter.win);
            take(s, "step", c.segmenter.step);
            take(s, "weight", c.segmenter.weight);
            take(s, "min_slice", c.segmenter.min_slice);
            take(s, "bins", c.segmenter.bins);
        }
        if (j.contains("mfcc")) {
            const auto& s = j["mfcc"];
            only_keys(s, {"frame", "hop", "preemphasis", "mel_filters", "low_hz", "high_hz",
                          "delta_window", "log_floor"},
                      "mfcc");
            take(s, "frame", c.mfcc.frame);
            take(s, "hop", c.mfcc.hop);
            take(s, "preemphasis", c.mfcc.preemphasis);
            take(s, "mel_filters", c.mfcc.mel_filters);
            take(s, "low_hz", c.mfcc.low_hz);
            take(s, "high_hz", c.mfcc.high_hz);
            take(s, "delta_window", c.mfcc.delta_window);
            take(s, "log_floor", c.mfcc.log_floor);
        }
        if (j.contains("gmm")) {
            const auto& s = j["gmm"];
            only_keys(s, {"components", "max_iter", "tol", "var_floor_ratio", "kmeans_iter", "seed",
                          "reject_below"},
                      "gmm");
            take(s, "components", c.em.components);
            take(s, "max_iter", c.em.max_iter);
            take(s, "tol", c.em.tol);
            take(s, "var_floor_ratio", c.em.var_floor_ratio);
            take(s, "kmeans_iter", c.em.kmeans_iter);
            take(s, "seed", c.seed);
            if (s.contains("reject_below") && !s["reject_below"].is_null())
                c.reject_below = s["reject_below"].get<double>();
        }
        if (j.contains("tempo")) {
            const auto& s = j["tempo"];
            only_keys(s, {"bpm_min", "bpm_max", "band_edges", "filter_order", "envelope_rate",
                          "hann_half", "diff_lag", "train_pulses", "divergence"},
                      "tempo");
            take(s, "bpm_min", c.comb.bpm_min);
            take(s, "bpm_max", c.comb.bpm_max);
            take(s, "band_edges", c.comb.band_edges);
            take(s, "filter_order", c.comb.filter_order);
            take(s, "envelope_rate", c.comb.envelope_rate);
            take(s, "hann_half", c.comb.hann_half);
            take(s, "diff_lag", c.comb.diff_lag);
            take(s, "train_pulses", c.comb.train_pulses);
            take(s, "divergence", c.divergence);
        }
        if (j.contains("beatmark")) {
            const auto& s = j["beatmark"];
            only_keys(s, {"wide_lo", "wide_hi", "long_gap_offset", "forced_length",
                          "energy_collapse_ratio"},
                      "beatmark");
            take(s, "wide_lo", c.beatmark.wide_lo);
            take(s, "wide_hi", c.beatmark.wide_hi);
            take(s, "long_gap_offset", c.beatmark.long_gap_offset);
            take(s, "forced_length", c.beatmark.forced_length);
            take(s, "energy_collapse_ratio", c.beatmark.energy_collapse_ratio);
        }
        if (j.contains("onset")) {
            const auto& s = j["onset"];
            only_keys(s, {"min_gap", "window", "ratio"}, "onset");
            take(s, "min_gap", c.onset.min_gap);
            take(s, "window", c.onset.window);
            take(s, "ratio", c.onset.ratio);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

// Accepts // and /* */ comments.
inline PipelineConfig load_config(const std::filesystem::path& path)
{
    const auto text = read_file(path);
    try {
        return config_from_json(nlohmann::json::parse(text, nullptr, true, true));
    } catch (const nlohmann::json::exception& e) {
        throw Error("cannot parse config " + path.string() + ": " + e.what());
    }
}

// FNV-1a over the canonical JSON dump.
inline std::string config_hash(const PipelineConfig& c)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config_to_json(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

enum class Stage { config, load, segment, features, classify, recognize, tempo, beatmark, evaluate, synth, train };

inline std::string_view to_string(Stage s)
{
    switch (s) {
    case Stage::config: return "config";
    case Stage::load: return "load";
    case Stage::segment: return "segment";
    case Stage::features: return "features";
    case Stage::classify: return "classify";
    case Stage::recognize: return "recognize";
    case Stage::tempo: return "tempo";
    case Stage::beatmark: return "beatmark";
    case Stage::evaluate: return "evaluate";
    case Stage::synth: return "synth";
    case Stage::train: return "train";
    }
    return "unknown";
}

inline int exit_code(Stage s) { return 2 + int(s); }

class StageError : public Error {
public:
    StageError(Stage s, const std::string& msg)
        : Error(std::string(to_string(s)) + ": " + msg), stage(s)
    {
    }
    Stage stage;
};

// ---- intermediate tables ---------------------------------------------------

inline std::string slices_csv(std::span<const NonSilentSlice> slices)
{
    std::string out = "index,tau_s,tau_e\n";
    for (std::size_t i = 0; i < slices.size(); ++i)
        out += std::to_string(i) + "," + format_exact(slices[i].start_time) + "," +
               format_exact(slices[i].end_time) + "\n";
    return out;
}

inline std::vector<NonSilentSlice> parse_slices_csv(std::istream& in, double sample_rate)
{
    std::vector<NonSilentSlice> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (trim(line).empty() || line.rfind("index", 0) == 0)
            continue;
        const auto f = split(line, ',');
        if (f.size() != 3)
            throw Error("slices line " + std::to_string(lineno) + ": expected 3 columns");
        NonSilentSlice s;
        s.start_time = parse_double(f[1]);
        s.end_time = parse_double(f[2]);
        s.first_sample = std::size_t(std::llround(s.start_time * sample_rate));
        s.last_sample = std::size_t(std::llround(s.end_time * sample_rate));
        out.push_back(s);
    }
    return out;
}

inline std::string_view to_string(EnergyClass e)
{
    return e == EnergyClass::high ? "high" : e == EnergyClass::low ? "low" : "unset";
}

inline std::string signature_csv(const SignalSignature& ss)
{
    std::string out = "index,bol_label,bol_code,tau_s,tau_e,raw_energy,score,energy_class\n";
    for (std::size_t i = 0; i < ss.events.size(); ++i) {
        const auto& e = ss.events[i];
        out += std::to_string(i) + "," + std::string(label(e.bol)) + "," +
               std::to_string(code(e.bol)) + "," + format_exact(e.tau_s) + "," +
               format_exact(e.tau_e) + "," + format_exact(e.raw_energy) + "," +
               format_exact(e.score) + "," + std::string(to_string(e.energy_class)) + "\n";
    }
    return out;
}

inline SignalSignature parse_signature_csv(std::istream& in)
{
    SignalSignature ss;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (trim(line).empty() || line.rfind("index", 0) == 0)
            continue;
        const auto f = split(line, ',');
        if (f.size() != 8)
            throw Error("signature line " + std::to_string(lineno) + ": expected 8 columns");
        BolEvent e;
        const auto bol = bol_from_code(int(parse_int(f[2])));
        if (!bol)
            throw Error("signature line " + std::to_string(lineno) + ": bad bol code");
        e.bol = *bol;
        e.tau_s = parse_double(f[3]);
        e.tau_e = parse_double(f[4]);
        e.raw_energy = parse_double(f[5]);
        e.score = f[6] == "-inf" ? -std::numeric_limits<double>::infinity() : parse_double(f[6]);
        e.energy_class = f[7] == "high" ? EnergyClass::high
                         : f[7] == "low" ? EnergyClass::low
                                         : EnergyClass::unset;
        ss.events.push_back(e);
    }
    return ss;
}

inline std::string recognition_csv(const Recognition& r)
{
    std::string out = "rank,name,distance\n";
    for (std::size_t i = 0; i < r.table.size(); ++i)
        out += std::to_string(i + 1) + "," + r.table[i].name + "," +
               std::to_string(r.table[i].distance) + "\n";
    return out;
}

inline std::string comb_energies_csv(const TempoEstimate& t)
{
    std::string out = "bpm,energy\n";
    for (const auto& [bpm, e] : t.band_energies)
        out += std::to_string(bpm) + "," + format_exact(e) + "\n";
    return out;
}

inline nlohmann::json tempo_to_json(const TempoEstimate& t)
{
    nlohmann::json j;
    j["method"] = std::string(to_string(t.method));
    j["period"] = t.period;
    if (t.method == TempoMethod::comb) {
        j["bpm"] = t.bpm;
    } else {
        j["beat_times"] = t.beat_times;
        j["per_gap_estimates"] = t.per_gap_estimates;
    }
    return j;
}

// One row per MFCC frame: slice index, class code, then the 39 features.
inline std::string features_csv(const std::vector<std::pair<Bol, FeatureSequence>>& seqs)
{
    std::string out = "slice,bol_code";
    for (std::size_t d = 0; d < kFeatureDim; ++d)
        out += ",f" + std::to_string(d);
    out += "\n";
    for (std::size_t i = 0; i < seqs.size(); ++i)
        for (const auto& v : seqs[i].second.vectors) {
            out += std::to_string(i) + "," + std::to_string(code(seqs[i].first));
            for (double x : v)
                out += "," + format_exact(x);
            out += "\n";
        }
    return out;
}

// Frames grouped by class; unlabelled frames (code 0) are skipped.
inline void parse_features_csv(std::istream& in, std::map<Bol, std::vector<FeatureVector>>& into)
{
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (trim(line).empty() || line.rfind("slice", 0) == 0)
            continue;
        const auto f = split(line, ',');
        if (f.size() != 2 + kFeatureDim)
            throw Error("features line " + std::to_string(lineno) + ": expected " +
                        std::to_string(2 + kFeatureDim) + " columns");
        const auto bol = bol_from_code(int(parse_int(f[1])));
        if (!bol)
            throw Error("features line " + std::to_string(lineno) + ": bad bol code");
        if (*bol == Bol::unknown)
            continue;
        FeatureVector v;
        for (std::size_t d = 0; d < kFeatureDim; ++d)
            v[d] = parse_double(f[2 + d]);
        into[*bol].push_back(v);
    }
}

// ---- training helpers ------------------------------------------------------

// The annotation row overlapping a slice the most, if any.
inline std::optional<BeatRow> label_for_slice(const NonSilentSlice& s, std::span<const BeatRow> truth)
{
    std::optional<BeatRow> best;
    double best_overlap = 0.0;
    for (const auto& r : truth) {
        const double ov = std::min(s.end_time, r.tau_e) - std::max(s.start_time, r.tau_s);
        if (ov > best_overlap) {
            best_overlap = ov;
            best = r;
        }
    }
    return best;
}

struct LabelledSlice {
    Bol bol = Bol::unknown;
    FeatureSequence features;
};

inline std::vector<LabelledSlice> labelled_features(const AudioSignal& sig,
                                                    std::span<const NonSilentSlice> slices,
                                                    std::span<const BeatRow> truth,
                                                    const MfccConfig& cfg = {})
{
    const MfccExtractor mfcc(sig.sample_rate, cfg);
    std::vector<LabelledSlice> out;
    for (const auto& s : slices) {
        const auto row = label_for_slice(s, truth);
        if (!row)
            continue;
        try {
            out.push_back({row->bol, mfcc.compute(sig, s)});
        } catch (const SliceTooShort&) {
        }
    }
    return out;
}

// ---- pipeline ---------------------------------------------------------------

struct PipelineReport {
    std::string source;
    std::string config_hash;
    std::vector<NonSilentSlice> slices;
    SignalSignature signature;
    std::optional<Recognition> recognition;
    std::optional<TempoEstimate> comb;
    std::string comb_error;
    std::optional<TempoEstimate> lcs;
    std::string lcs_error;
    std::optional<TempoSelection> tempo;
    DetectedBeats beats;
    std::string beats_source;
    std::vector<MarkedBeat> marked;
    std::optional<MatchScores> scores;
    std::vector<std::string> warnings;
    std::optional<Stage> failed_stage;
    std::string error;

    bool ok() const { return !failed_stage; }
};

inline nlohmann::json report_to_json(const PipelineReport& r)
{
    nlohmann::json j;
    j["source"] = r.source;
    j["config_hash"] = r.config_hash;
    j["status"] = r.ok() ? "ok" : "failed";
    if (r.failed_stage) {
        j["failed_stage"] = std::string(to_string(*r.failed_stage));
        j["error"] = r.error;
    }
    auto& segs = j["segments"] = nlohmann::json::array();
    for (const auto& s : r.slices)
        segs.push_back({s.start_time, s.end_time});
    auto& gamma = j["signal_signature"] = nlohmann::json::array();
    for (const auto& e : r.signature.events)
        gamma.push_back({{"bol", std::string(label(e.bol))},
                         {"code", code(e.bol)},
                         {"tau_s", e.tau_s},
                         {"tau_e", e.tau_e},
                         {"energy", e.raw_energy},
                         {"energy_class", std::string(to_string(e.energy_class))}});
    std::vector<int> codes;
    for (Bol b : r.signature.string_view())
        codes.push_back(code(b));
    j["gamma"] = codes;
    if (r.recognition) {
        j["recognized"] = r.recognition->name;
        j["distance"] = r.recognition->distance;
        j["ties"] = r.recognition->ties;
        auto& t = j["distance_table"] = nlohmann::json::array();
        for (const auto& e : r.recognition->table)
            t.push_back({{"name", e.name}, {"distance", e.distance}});
    }
    auto& tempo = j["tempo"];
    tempo["comb"] = r.comb ? tempo_to_json(*r.comb) : nlohmann::json{{"error", r.comb_error}};
    tempo["lcs"] = r.lcs ? tempo_to_json(*r.lcs) : nlohmann::json{{"error", r.lcs_error}};
    if (r.tempo) {
        tempo["selected"] = std::string(to_string(r.tempo->estimate.method));
        tempo["period"] = r.tempo->estimate.period;
    }
    j["beats_source"] = r.beats_source;
    j["beats"] = r.beats.timestamps;
    auto& mb = j["marked_beats"] = nlohmann::json::array();
    for (const auto& m : r.marked)
        mb.push_back({{"bol", std::string(label(m.bol))},
                      {"tau_s", m.tau_s},
                      {"tau_e", m.tau_e},
                      {"beat", std::string(to_string(m.type))}});
    if (r.scores)
        j["evaluation"] = {{"time", r.scores->time},
                           {"bol", r.scores->bol},
                           {"event", r.scores->event},
                           {"annotated", r.scores->total}};
    j["warnings"] = r.warnings;
    return j;
}

struct PipelineInputs {
    const std::vector<SollukattuSignature>* dictionary = nullptr;
    const GmmModel* model = nullptr;
    std::optional<DetectedBeats> beats;
    std::optional<std::vector<AnnotationRecord>> annotation;
    std::optional<std::filesystem::path> out_dir;
};

// Runs every stage in order. A failing stage stops the run; everything
// computed so far stays in the report and in out_dir.
inline PipelineReport run_pipeline(const AudioSignal& sig, const PipelineInputs& in,
                                   const PipelineConfig& cfg, const std::string& source = "")
{
    PipelineReport r;
    r.source = source;
    r.config_hash = config_hash(cfg);
    auto emit = [&](const char* name, const std::string& text) {
        if (in.out_dir)
            write_file_atomic(*in.out_dir / name, text);
    };
    auto finish = [&]() {
        emit("report.json", report_to_json(r).dump(2) + "\n");
        return r;
    };
    Stage stage = Stage::segment;
    try {
        if (!in.dictionary || in.dictionary->empty() || !in.model)
            throw Error("dictionary and model are required");

        r.slices = segment_by_silence(sig, cfg.segmenter);
        emit("slices.csv", slices_csv(r.slices));

        stage = Stage::classify;
        r.signature = build_signal_signature(sig, r.slices, *in.model, cfg.mfcc, cfg.reject_below);
        if (!r.signature.events.empty())
            assign_energy_classes(r.signature.events, cfg.beatmark.energy_collapse_ratio);
        emit("signature.csv", signature_csv(r.signature));

        stage = Stage::recognize;
        r.recognition = recognize_sollukattu(r.signature, *in.dictionary);
        if (!r.recognition->ties.empty()) {
            std::string names;
            for (const auto& n : r.recognition->ties)
                names += (names.empty() ? "" : ", ") + n;
            r.warnings.push_back("recognition tie between " + names);
        }
        emit("recognition.csv", recognition_csv(*r.recognition));

        stage = Stage::tempo;
        try {
            r.comb = comb_tempo(sig, cfg.comb);
            emit("comb_energies.csv", comb_energies_csv(*r.comb));
        } catch (const TempoError& e) {
            r.comb_error = e.what();
        }
        try {
            r.lcs = lcs_tempo(r.signature, find_signature(*in.dictionary, r.recognition->name));
        } catch (const TempoError& e) {
            r.lcs_error = e.what();
        }
        r.tempo = select_tempo(r.comb, r.lcs, cfg.divergence);
        for (const auto& w : r.tempo->warnings)
            r.warnings.push_back(w);

        stage = Stage::beatmark;
        if (in.beats) {
            r.beats = *in.beats;
            r.beats_source = "file";
        } else {
            r.beats.timestamps = detect_onsets(sig, cfg.comb, cfg.onset);
            r.beats_source = "onset-fallback";
            r.warnings.push_back("no detected-beats file; using the onset peak-picker");
        }
        emit("beats.txt", detected_beats_text(r.beats));
        r.marked = mark_beats(r.beats.timestamps, r.signature.events, r.tempo->estimate.period,
                              cfg.beatmark);
        emit("marked.csv", annotation_csv(r.marked));

        if (in.annotation) {
            stage = Stage::evaluate;
            r.scores = evaluate(r.marked, *in.annotation);
        }
    } catch (const std::exception& e) {
        r.failed_stage = stage;
        r.error = e.what();
    }
    return finish();
}

} // namespace sollu
