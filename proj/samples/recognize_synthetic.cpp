// Trains bol models on synthetic renders, then recognizes a fresh render and
// marks its beats.
#include <iostream>

#include <sollu/sollu.hpp>

using namespace sollu;

int main()
{
    const auto dict = load_dictionary(SOLLU_DATA_DIR "/sollukattu.dict");
    auto render = [&](const std::string& name, double period, std::uint64_t seed) {
        SynthSpec spec;
        spec.pattern = find_signature(dict, name);
        spec.period = period;
        spec.sample_rate = 16000;
        spec.jitter = 0.02;
        return synthesize(spec, seed);
    };

    std::map<Bol, std::vector<FeatureVector>> data;
    std::uint64_t seed = 1;
    for (const auto& p : dict)
        for (double T : {1.1, 1.4}) {
            const auto r = render(p.name, T, seed++);
            for (const auto& l : labelled_features(r.audio, segment_by_silence(r.audio), r.annotation))
                data[l.bol].insert(data[l.bol].end(), l.features.vectors.begin(), l.features.vectors.end());
        }
    EmOptions opt;
    opt.components = 6;
    const auto model = em_train<kFeatureDim>(data, opt, 1).model;

    const auto test = render("Tatta C", 1.25, 99);
    PipelineInputs in;
    in.dictionary = &dict;
    in.model = &model;
    in.beats = test.beats;
    in.annotation = test.annotation;
    const auto rep = run_pipeline(test.audio, in, PipelineConfig{});
    if (!rep.ok()) {
        std::cerr << to_string(*rep.failed_stage) << ": " << rep.error << "\n";
        return 1;
    }
    std::cout << "recognized " << rep.recognition->name << " (distance " << rep.recognition->distance
              << "), period " << format_fixed(rep.tempo->estimate.period, 3) << " s\n";
    write_annotation_csv(std::cout, rep.marked);
    std::cout << "event match " << format_fixed(rep.scores->event, 1) << "%\n";
}
