#include <doctest.h>

#include <set>

#include "sasv/synthgen.hpp"

using namespace sasv;

TEST_CASE("split sizes and trial counts") {
    SynthConfig cfg;
    cfg.n_speakers = 31;
    cfg.utts_per_speaker = 5;
    cfg.spoofs_per_speaker = 3;
    const auto data = generate(cfg);
    CHECK(data.speakers[0].size() == 11);
    CHECK(data.speakers[1].size() == 10);
    CHECK(data.speakers[2].size() == 10);
    CHECK(data.dev.count(TrialLabel::Target) == 50);
    CHECK(data.dev.count(TrialLabel::NonTarget) == 50);
    CHECK(data.dev.count(TrialLabel::Spoof) == 30);
    CHECK(data.stores.sv.size() == 31 * (1 + 5 + 3));
    CHECK(data.stores.cm.size() == 31 * (5 + 3));
    CHECK(data.stores.sv.dimension() == 32);
    CHECK(data.stores.cm.dimension() == 16);
}

TEST_CASE("splits are speaker-disjoint and self-contained") {
    SynthConfig cfg;
    cfg.n_speakers = 12;
    cfg.utts_per_speaker = 4;
    const auto data = generate(cfg);
    const std::array<const Protocol*, 3> ps{&data.train, &data.dev, &data.eval};
    std::set<std::string> all;
    for (int s = 0; s < 3; ++s) {
        const std::set<std::string> mine(data.speakers[s].begin(), data.speakers[s].end());
        for (const auto& t : ps[s]->trials) {
            CHECK(mine.contains(t.enroll_id));
            CHECK(mine.contains(t.test_id.substr(0, 7)));
            if (t.label == TrialLabel::NonTarget) CHECK(t.enroll_id != t.test_id.substr(0, 7));
            else CHECK(t.enroll_id == t.test_id.substr(0, 7));
        }
        all.insert(mine.begin(), mine.end());
        CHECK_NOTHROW(check_resolvable(*ps[s], data.stores));
    }
    CHECK(all.size() == 12);
}

TEST_CASE("generation is deterministic in the seed") {
    SynthConfig cfg;
    cfg.n_speakers = 9;
    cfg.utts_per_speaker = 3;
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    CHECK(format_embeddings(a.stores.sv) == format_embeddings(b.stores.sv));
    CHECK(format_embeddings(a.stores.cm) == format_embeddings(b.stores.cm));
    CHECK(format_protocol(a.dev) == format_protocol(b.dev));
    cfg.seed = 1;
    CHECK(format_embeddings(generate(cfg).stores.sv) != format_embeddings(a.stores.sv));
}

TEST_CASE("geometry follows the configuration") {
    SynthConfig cfg;
    cfg.n_speakers = 30;
    const auto data = generate(cfg);
    const auto s = describe(cfg, data);
    CHECK(s.speakers_disjoint);
    // Two noisy copies of a unit centroid with per-coordinate noise 0.1 in 32
    // dimensions: cosine about 1 / (1 + 32 * 0.01) = 0.76.
    CHECK(s.within_speaker_cosine == doctest::Approx(1.0 / 1.32).epsilon(0.03));
    CHECK(std::abs(s.between_speaker_cosine) < 0.05);
    CHECK(s.cm_separation == doctest::Approx(4.0).epsilon(0.02));
    for (const auto& e : data.stores.sv.entries()) CHECK(norm(e.values) == doctest::Approx(1.0));

    // With an offset, spoofs of a speaker move away from its centroid.
    cfg.spoof_sv_offset = 1.0;
    const auto shifted = generate(cfg);
    double target = 0, spoof = 0;
    for (const auto& t : shifted.eval.trials) {
        const double c = cosine(shifted.stores.sv.at(t.enroll_id), shifted.stores.sv.at(t.test_id));
        if (t.label == TrialLabel::Target) target += c;
        if (t.label == TrialLabel::Spoof) spoof += c;
    }
    CHECK(spoof < 0.9 * target);
}

TEST_CASE("raw cm scores are the bonafide-axis coordinate") {
    SynthConfig cfg;
    cfg.n_speakers = 6;
    const auto data = generate(cfg);
    const auto scores = raw_cm_scores(data);
    CHECK(scores.size() == data.stores.cm.size());
    for (const auto& [id, v] : scores) CHECK(v == data.stores.cm.at(id).values[0]);
}

TEST_CASE("invalid configurations") {
    SynthConfig cfg;
    cfg.n_speakers = 5;
    CHECK_THROWS_AS(generate(cfg), ConfigError);
    cfg = {};
    cfg.sv_noise = 0;
    CHECK_THROWS_AS(generate(cfg), ConfigError);
    cfg = {};
    cfg.cm_dim = 1;
    CHECK_THROWS_AS(generate(cfg), ConfigError);
}

TEST_CASE("summary text") {
    SynthConfig cfg;
    cfg.n_speakers = 6;
    const auto text = format_summary(describe(cfg, generate(cfg)));
    CHECK(text.find("train") != std::string::npos);
    CHECK(text.find("speaker sets disjoint       yes") != std::string::npos);
}
