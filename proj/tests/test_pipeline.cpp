#include <filesystem>

#include <gtest/gtest.h>

#include <sollu/pipeline.hpp>
#include <sollu/synth.hpp>

using namespace sollu;
namespace fs = std::filesystem;

namespace {

const std::vector<SollukattuSignature>& dict()
{
    static const auto d = load_dictionary(SOLLU_DATA_DIR "/sollukattu.dict");
    return d;
}

SynthResult render(const std::string& name, double T, std::uint64_t seed)
{
    SynthSpec spec;
    spec.pattern = find_signature(dict(), name);
    spec.period = T;
    spec.bars = 2;
    spec.jitter = 0.02;
    spec.sample_rate = 16000;
    return synthesize(spec, seed);
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("sollu_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST(Config, DefaultsFileMatchesBuiltins)
{
    const auto c = load_config(SOLLU_DATA_DIR "/default_config.jsonc");
    EXPECT_EQ(config_to_json(c), config_to_json(PipelineConfig{}));
    EXPECT_EQ(config_hash(c), config_hash(PipelineConfig{}));
}

TEST(Config, RoundTripAndHash)
{
    PipelineConfig c;
    c.segmenter.weight = 2.5;
    c.reject_below = -80.0;
    c.comb.bpm_max = 80;
    const auto back = config_from_json(config_to_json(c));
    EXPECT_EQ(config_to_json(back), config_to_json(c));
    EXPECT_NE(config_hash(c), config_hash(PipelineConfig{}));
    EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Config, RejectsBadValues)
{
    EXPECT_THROW(config_from_json({{"segmenter", {{"wn", 0.1}}}}), Error);
    EXPECT_THROW(config_from_json({{"extra", 1}}), Error);
    EXPECT_THROW(config_from_json({{"segmenter", {{"step", 0.2}}}}), Error);
    EXPECT_THROW(config_from_json({{"tempo", {{"bpm_min", 80}}}}), Error);
    EXPECT_THROW(config_from_json({{"gmm", {{"components", "many"}}}}), Error);
    EXPECT_THROW(config_from_json({{"tempo", {{"band_edges", {900, 0}}}}}), Error);
}

TEST(Synth, NattaRendering)
{
    const auto r = render("Natta", 1.2, 5);
    ASSERT_EQ(r.annotation.size(), 28u);
    EXPECT_EQ(r.beats.timestamps.size(), 16u);
    EXPECT_EQ(r.annotation[1].type, BeatType::HB);
    EXPECT_NEAR(r.annotation[1].tau_s - r.annotation[0].tau_s, 0.6, 0.03);
    for (std::size_t i = 1; i < r.annotation.size(); ++i)
        EXPECT_GT(r.annotation[i].tau_s, r.annotation[i - 1].tau_e);
    for (double v : r.audio.samples)
        ASSERT_LE(std::abs(v), 1.0);
}

TEST(Synth, DeterministicPerSeed)
{
    const auto a = render("Tatta C", 1.0, 9), b = render("Tatta C", 1.0, 9), c = render("Tatta C", 1.0, 10);
    EXPECT_EQ(a.audio.samples, b.audio.samples);
    EXPECT_EQ(a.annotation, b.annotation);
    EXPECT_NE(a.audio.samples, c.audio.samples);
}

TEST(Synth, RejectsOutOfRangeSpecs)
{
    SynthSpec spec;
    spec.pattern = find_signature(dict(), "Natta");
    spec.period = 0.5;
    EXPECT_THROW(synthesize(spec, 1), SynthError);
    spec.period = 1.0;
    spec.jitter = 0.2;
    EXPECT_THROW(synthesize(spec, 1), SynthError);
    spec.jitter = 0.0;
    spec.vocal_dur = 0.45;
    EXPECT_THROW(synthesize(spec, 1), SynthError);
}

TEST(Pipeline, EndToEndWritesArtifacts)
{
    std::map<Bol, std::vector<FeatureVector>> data;
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto r = render("Natta", 1.2, seed);
        for (const auto& l : labelled_features(r.audio, segment_by_silence(r.audio), r.annotation))
            data[l.bol].insert(data[l.bol].end(), l.features.vectors.begin(), l.features.vectors.end());
    }
    PipelineConfig cfg;
    cfg.em.components = 4;
    const auto model = em_train<kFeatureDim>(data, cfg.em, cfg.seed, 1).model;

    const auto test = render("Natta", 1.2, 4);
    const auto dir = scratch("e2e");
    PipelineInputs in;
    in.dictionary = &dict();
    in.model = &model;
    in.beats = test.beats;
    in.annotation = test.annotation;
    in.out_dir = dir;
    const auto rep = run_pipeline(test.audio, in, cfg, "natta.wav");
    ASSERT_TRUE(rep.ok()) << rep.error;
    EXPECT_EQ(rep.recognition->name, "Natta");
    EXPECT_NEAR(rep.tempo->estimate.period, 1.2, 0.05);
    EXPECT_GE(rep.scores->event, 95.0);
    for (const char* f : {"slices.csv", "signature.csv", "recognition.csv", "comb_energies.csv",
                          "beats.txt", "marked.csv", "report.json"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;

    // Re-marking from the written intermediates reproduces marked.csv.
    std::ifstream sig_in(dir / "signature.csv");
    const auto ss = parse_signature_csv(sig_in);
    const auto db = load_detected_beats(dir / "beats.txt");
    const auto again = mark_beats(db.timestamps, ss.events, rep.tempo->estimate.period, cfg.beatmark);
    EXPECT_EQ(annotation_csv(again), read_file(dir / "marked.csv"));

    std::ifstream sl_in(dir / "slices.csv");
    const auto slices = parse_slices_csv(sl_in, test.audio.sample_rate);
    ASSERT_EQ(slices.size(), rep.slices.size());
    EXPECT_EQ(slices.front().start_time, rep.slices.front().start_time);

    const auto json = nlohmann::json::parse(read_file(dir / "report.json"));
    EXPECT_EQ(json["status"], "ok");
    EXPECT_EQ(json["config_hash"], config_hash(cfg));
}

TEST(Pipeline, FailureKeepsPartialOutputs)
{
    AudioSignal silence;
    silence.sample_rate = 16000;
    silence.samples.assign(16000 * 3, 0.0);
    GmmModel model;
    model.classes.emplace(Bol::ta, DiagonalGmm<kFeatureDim>({1.0}, {FeatureVector{}}, {[] {
                                                                 FeatureVector v;
                                                                 v.fill(1.0);
                                                                 return v;
                                                             }()}));
    const auto dir = scratch("fail");
    PipelineInputs in;
    in.dictionary = &dict();
    in.model = &model;
    in.out_dir = dir;
    const auto rep = run_pipeline(silence, in, PipelineConfig{});
    ASSERT_FALSE(rep.ok());
    EXPECT_EQ(rep.failed_stage, Stage::recognize);
    EXPECT_TRUE(fs::exists(dir / "slices.csv"));
    EXPECT_TRUE(fs::exists(dir / "signature.csv"));
    EXPECT_FALSE(fs::exists(dir / "marked.csv"));
    const auto json = nlohmann::json::parse(read_file(dir / "report.json"));
    EXPECT_EQ(json["failed_stage"], "recognize");
    EXPECT_EQ(exit_code(Stage::recognize), 2 + int(Stage::recognize));
}
