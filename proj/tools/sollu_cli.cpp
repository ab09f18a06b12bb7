#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include <sollu/sollu.hpp>

using namespace sollu;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

Globals g;
std::mutex log_mutex;

void log(const std::string& msg)
{
    if (g.quiet)
        return;
    std::lock_guard lock(log_mutex);
    std::cerr << "sollu: " << msg << "\n";
}

PipelineConfig config()
{
    PipelineConfig c;
    try {
        if (!g.config.empty())
            c = load_config(g.config);
        if (g.seed)
            c.seed = *g.seed;
        c.validate();
    } catch (const std::exception& e) {
        throw StageError(Stage::config, e.what());
    }
    return c;
}

// Runs `fn`, turning any library error into a StageError for `stage`.
template <class F>
auto stage(Stage s, F&& fn)
{
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(s, e.what());
    }
}

void emit(const std::string& out, const std::string& text)
{
    if (out.empty() || out == "-")
        std::cout << text;
    else
        write_file_atomic(out, text);
}

AudioSignal read_audio(const std::string& path)
{
    return stage(Stage::load, [&] { return load_wav(path); });
}

std::vector<NonSilentSlice> slices_for(const AudioSignal& sig, const std::string& slices_path,
                                       const PipelineConfig& cfg)
{
    if (slices_path.empty())
        return stage(Stage::segment, [&] { return segment_by_silence(sig, cfg.segmenter); });
    return stage(Stage::load, [&] {
        std::ifstream in(slices_path);
        if (!in)
            throw Error("cannot open " + slices_path);
        return parse_slices_csv(in, sig.sample_rate);
    });
}

SignalSignature read_signature(const std::string& path)
{
    return stage(Stage::load, [&] {
        std::ifstream in(path);
        if (!in)
            throw Error("cannot open " + path);
        return parse_signature_csv(in);
    });
}

std::vector<SollukattuSignature> read_dict(const std::string& path)
{
    return stage(Stage::load, [&] { return load_dictionary(path); });
}

std::string slug(std::string s)
{
    for (auto& c : s)
        c = std::isalnum(static_cast<unsigned char>(c)) ? char(std::tolower(c)) : '_';
    return s;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sollukattu audio analysis"};
    app.require_subcommand(1);
    app.add_option("--config", g.config, "JSON or JSONC configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "override the training seed");
    app.add_flag("-q,--quiet", g.quiet, "suppress warnings on stderr");

    std::string wav, out, out_dir, dict_path, model_path, db_path, slices_path, signature_path,
        annotation_path, marked_path, pattern, name;
    double period = 0.0, jitter = 0.0, sample_rate = 44100.0;
    std::size_t bars = 2;
    unsigned jobs = 0;
    std::vector<std::string> inputs;

    auto* synth = app.add_subcommand("synth", "render a pattern with its annotation and beats");
    synth->add_option("--dict", dict_path, "dictionary file")->required()->check(CLI::ExistingFile);
    synth->add_option("--pattern", pattern, "pattern name")->required();
    synth->add_option("--period", period, "tempo period, seconds")->required();
    synth->add_option("--bars", bars, "number of bars")->default_val(2);
    synth->add_option("--jitter", jitter, "relative inter-onset jitter")->default_val(0.0);
    synth->add_option("--sample-rate", sample_rate)->default_val(44100.0);
    synth->add_option("--name", name, "output stem; defaults to the pattern name");
    synth->add_option("--out-dir", out_dir)->required();

    auto* segment = app.add_subcommand("segment", "non-silent slices as CSV");
    segment->add_option("wav", wav)->required()->check(CLI::ExistingFile);
    segment->add_option("-o,--out", out, "output file; stdout by default");

    auto* features = app.add_subcommand("features", "per-slice MFCC frames as CSV");
    features->add_option("wav", wav)->required()->check(CLI::ExistingFile);
    features->add_option("--slices", slices_path, "slices CSV; segments the audio if omitted");
    features->add_option("--annotation", annotation_path, "label slices from this annotation");
    features->add_option("-o,--out", out);

    auto* train = app.add_subcommand("train-gmm", "fit one mixture per class from feature CSVs");
    train->add_option("inputs", inputs, "feature CSV files")->required()->check(CLI::ExistingFile);
    train->add_option("-o,--out", out, "model JSON")->required();
    train->add_option("-j,--jobs", jobs, "worker threads; 0 uses all cores")->default_val(0);

    auto* cls = app.add_subcommand("classify", "signal signature CSV for one recording");
    cls->add_option("wav", wav)->required()->check(CLI::ExistingFile);
    cls->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    cls->add_option("--slices", slices_path);
    cls->add_option("-o,--out", out);

    auto* rec = app.add_subcommand("recognize", "rank dictionary patterns against a signature");
    rec->add_option("--signature", signature_path)->required()->check(CLI::ExistingFile);
    rec->add_option("--dict", dict_path)->required()->check(CLI::ExistingFile);
    rec->add_option("-o,--out", out);

    auto* tempo = app.add_subcommand("tempo", "comb and LCS tempo estimates as JSON");
    tempo->add_option("wav", wav)->required()->check(CLI::ExistingFile);
    tempo->add_option("--signature", signature_path, "enables the LCS estimate");
    tempo->add_option("--dict", dict_path);
    tempo->add_option("--pattern", pattern, "pattern for LCS; recognized if omitted");
    tempo->add_option("-o,--out", out);

    auto* mark = app.add_subcommand("mark-beats", "beat annotation from a signature");
    mark->add_option("--signature", signature_path)->required()->check(CLI::ExistingFile);
    mark->add_option("--db", db_path, "detected 1-beat timestamps")->required()->check(CLI::ExistingFile);
    mark->add_option("--period", period, "tempo period, seconds")->required();
    mark->add_option("-o,--out", out);

    auto* eval = app.add_subcommand("evaluate", "time, bol and event match percentages");
    eval->add_option("--marked", marked_path)->required()->check(CLI::ExistingFile);
    eval->add_option("--annotation", annotation_path)->required()->check(CLI::ExistingFile);
    eval->add_option("-o,--out", out);

    auto* run = app.add_subcommand("run", "full pipeline over one or more recordings");
    run->add_option("inputs", inputs, "WAV files")->required()->check(CLI::ExistingFile);
    run->add_option("--dict", dict_path)->required()->check(CLI::ExistingFile);
    run->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    run->add_option("--db", db_path,
                    "beats file, or a directory of <stem>.beats.txt; the onset picker is used otherwise");
    run->add_option("--annotation", annotation_path,
                    "annotation CSV, or a directory of <stem>.annotation.csv");
    run->add_option("--out-dir", out_dir)->required();
    run->add_option("-j,--jobs", jobs, "parallel recordings; 0 uses all cores")->default_val(0);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*synth) {
            const auto dict = read_dict(dict_path);
            const auto res = stage(Stage::synth, [&] {
                SynthSpec spec;
                spec.pattern = find_signature(dict, pattern);
                spec.period = period;
                spec.bars = bars;
                spec.jitter = jitter;
                spec.sample_rate = sample_rate;
                return synthesize(spec, config().seed);
            });
            const auto stem = fs::path(out_dir) / (name.empty() ? slug(pattern) : name);
            write_file_atomic(stem.string() + ".wav", encode_wav16(res.audio));
            write_file_atomic(stem.string() + ".annotation.csv", annotation_csv(res.annotation));
            write_file_atomic(stem.string() + ".beats.txt", detected_beats_text(res.beats));
        } else if (*segment) {
            const auto cfg = config();
            const auto sig = read_audio(wav);
            emit(out, slices_csv(slices_for(sig, "", cfg)));
        } else if (*features) {
            const auto cfg = config();
            const auto sig = read_audio(wav);
            const auto slices = slices_for(sig, slices_path, cfg);
            std::optional<std::vector<BeatRow>> truth;
            if (!annotation_path.empty())
                truth = stage(Stage::load, [&] { return load_annotation(annotation_path); });
            const auto seqs = stage(Stage::features, [&] {
                const MfccExtractor mfcc(sig.sample_rate, cfg.mfcc);
                std::vector<std::pair<Bol, FeatureSequence>> out_seqs;
                for (const auto& s : slices) {
                    Bol b = Bol::unknown;
                    if (truth)
                        if (const auto row = label_for_slice(s, *truth))
                            b = row->bol;
                    try {
                        out_seqs.emplace_back(b, mfcc.compute(sig, s));
                    } catch (const SliceTooShort&) {
                        log("skipping slice at " + format_fixed(s.start_time, 3) + " s: too short");
                    }
                }
                return out_seqs;
            });
            emit(out, features_csv(seqs));
        } else if (*train) {
            const auto cfg = config();
            std::map<Bol, std::vector<FeatureVector>> data;
            for (const auto& path : inputs)
                stage(Stage::load, [&] {
                    std::ifstream in(path);
                    parse_features_csv(in, data);
                    return 0;
                });
            const auto res = stage(Stage::train, [&] {
                if (data.empty())
                    throw Error("no labelled frames in the inputs");
                return em_train<kFeatureDim>(data, cfg.em, cfg.seed, jobs);
            });
            for (const auto& w : res.warnings)
                log(w);
            write_file_atomic(out, model_to_json(res.model).dump() + "\n");
        } else if (*cls) {
            const auto cfg = config();
            const auto sig = read_audio(wav);
            const auto model = stage(Stage::load, [&] { return load_model(model_path); });
            const auto slices = slices_for(sig, slices_path, cfg);
            auto ss = stage(Stage::classify, [&] {
                auto s = build_signal_signature(sig, slices, model, cfg.mfcc, cfg.reject_below);
                if (!s.events.empty())
                    assign_energy_classes(s.events, cfg.beatmark.energy_collapse_ratio);
                return s;
            });
            emit(out, signature_csv(ss));
        } else if (*rec) {
            const auto ss = read_signature(signature_path);
            const auto dict = read_dict(dict_path);
            const auto r = stage(Stage::recognize, [&] { return recognize_sollukattu(ss, dict); });
            if (!r.ties.empty())
                log("recognition tie; reporting " + r.name);
            emit(out, recognition_csv(r));
        } else if (*tempo) {
            const auto cfg = config();
            const auto sig = read_audio(wav);
            nlohmann::json j;
            std::optional<TempoEstimate> comb, lcs;
            try {
                comb = comb_tempo(sig, cfg.comb);
                j["comb"] = tempo_to_json(*comb);
            } catch (const TempoError& e) {
                j["comb"] = {{"error", e.what()}};
            }
            if (!signature_path.empty()) {
                if (dict_path.empty())
                    throw StageError(Stage::tempo, "--signature needs --dict");
                const auto ss = read_signature(signature_path);
                const auto dict = read_dict(dict_path);
                try {
                    const auto name_ = pattern.empty() ? recognize_sollukattu(ss, dict).name : pattern;
                    lcs = lcs_tempo(ss, find_signature(dict, name_));
                    j["lcs"] = tempo_to_json(*lcs);
                    j["lcs"]["pattern"] = name_;
                } catch (const Error& e) {
                    j["lcs"] = {{"error", e.what()}};
                }
            }
            const auto sel = stage(Stage::tempo, [&] { return select_tempo(comb, lcs, cfg.divergence); });
            for (const auto& w : sel.warnings)
                log(w);
            j["selected"] = std::string(to_string(sel.estimate.method));
            j["period"] = sel.estimate.period;
            emit(out, j.dump(2) + "\n");
        } else if (*mark) {
            const auto cfg = config();
            const auto ss = read_signature(signature_path);
            const auto db = stage(Stage::load, [&] { return load_detected_beats(db_path); });
            const auto mb = stage(Stage::beatmark, [&] {
                return mark_beats(db.timestamps, ss.events, period, cfg.beatmark);
            });
            emit(out, annotation_csv(mb));
        } else if (*eval) {
            const auto mb = stage(Stage::load, [&] { return load_annotation(marked_path); });
            const auto ab = stage(Stage::load, [&] { return load_annotation(annotation_path); });
            const auto s = stage(Stage::evaluate, [&] { return evaluate(mb, ab); });
            const nlohmann::json j = {{"time", s.time},
                                      {"bol", s.bol},
                                      {"event", s.event},
                                      {"time_matches", s.time_matches},
                                      {"bol_matches", s.bol_matches},
                                      {"event_matches", s.event_matches},
                                      {"annotated", s.total}};
            emit(out, j.dump(2) + "\n");
        } else if (*run) {
            const auto cfg = config();
            const auto dict = read_dict(dict_path);
            const auto model = stage(Stage::load, [&] { return load_model(model_path); });
            auto sidecar = [](const std::string& arg, const fs::path& wav_path,
                              const char* suffix) -> std::optional<fs::path> {
                if (arg.empty())
                    return std::nullopt;
                if (fs::is_directory(arg))
                    return fs::path(arg) / (wav_path.stem().string() + suffix);
                return fs::path(arg);
            };
            std::vector<int> codes(inputs.size(), 0);
            std::atomic<std::size_t> next{0};
            auto worker = [&] {
                for (std::size_t i; (i = next.fetch_add(1)) < inputs.size();) {
                    const fs::path path = inputs[i];
                    const auto dir = inputs.size() == 1 ? fs::path(out_dir)
                                                        : fs::path(out_dir) / path.stem();
                    try {
                        const auto sig = read_audio(path.string());
                        PipelineInputs in;
                        in.dictionary = &dict;
                        in.model = &model;
                        in.out_dir = dir;
                        if (const auto p = sidecar(db_path, path, ".beats.txt"))
                            in.beats = stage(Stage::load, [&] { return load_detected_beats(*p); });
                        if (const auto p = sidecar(annotation_path, path, ".annotation.csv"))
                            in.annotation = stage(Stage::load, [&] { return load_annotation(*p); });
                        const auto rep = run_pipeline(sig, in, cfg, path.string());
                        for (const auto& w : rep.warnings)
                            log(path.filename().string() + ": " + w);
                        if (!rep.ok()) {
                            log(path.filename().string() + ": " + std::string(to_string(*rep.failed_stage)) +
                                ": " + rep.error);
                            codes[i] = exit_code(*rep.failed_stage);
                        } else {
                            std::lock_guard lock(log_mutex);
                            std::cout << path.filename().string() << "\t" << rep.recognition->name << "\t"
                                      << format_fixed(rep.tempo->estimate.period, 3) << "\n";
                        }
                    } catch (const StageError& e) {
                        log(path.filename().string() + ": " + e.what());
                        codes[i] = exit_code(e.stage);
                    }
                }
            };
            const unsigned n = std::min<unsigned>(
                jobs ? jobs : std::max(1u, std::thread::hardware_concurrency()), unsigned(inputs.size()));
            std::vector<std::thread> pool;
            for (unsigned t = 1; t < n; ++t)
                pool.emplace_back(worker);
            worker();
            for (auto& t : pool)
                t.join();
            return *std::max_element(codes.begin(), codes.end());
        }
    } catch (const StageError& e) {
        std::cerr << "sollu: " << e.what() << "\n";
        return exit_code(e.stage);
    } catch (const std::exception& e) {
        std::cerr << "sollu: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
