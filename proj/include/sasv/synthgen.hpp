#pragma once

// Seeded synthetic SV/CM embeddings and trial protocols.
//
// Geometry:
//   - speaker centroids uniform on the SV unit sphere
//   - bonafide SV embedding  = normalize(centroid + sv_noise * g)
//   - spoof SV embedding     = normalize(centroid + spoof_sv_offset * d + sv_noise * g)
//     where d is one fixed random unit direction shared by all attacks
//   - bonafide CM embedding  = +cm_separation/2 * u + cm_noise * g
//   - spoof CM embedding     = -cm_separation/2 * u + cm_noise * g
//     where u is the first CM axis
//
// Draw order from one Rng(seed): d; all centroids in speaker order; then per
// speaker, the enrollment SV embedding, each bonafide utterance (SV then CM),
// each spoof (SV then CM); finally the nontarget enrollment picks per split.
// Speakers are split train / dev / eval in contiguous blocks (eval and dev
// get n/3 each, train the rest).

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sasv/core.hpp"

namespace sasv {

struct SynthConfig {
    std::size_t n_speakers = 30;
    std::size_t utts_per_speaker = 20;
    std::size_t spoofs_per_speaker = 20;
    std::size_t sv_dim = 32;
    std::size_t cm_dim = 16;
    double sv_noise = 0.1;
    double spoof_sv_offset = 0.0;
    double cm_separation = 4.0;
    double cm_noise = 0.5;
    std::uint64_t seed = 0;

    // Throws ConfigError on invalid values or fewer than two speakers per split.
    void validate() const;
};

struct SynthData {
    EmbeddingStores stores;
    Protocol train;
    Protocol dev;
    Protocol eval;
    std::array<std::vector<std::string>, 3> speakers;  // train, dev, eval
};

SynthData generate(const SynthConfig& cfg);

// Standalone CM score per test utterance: the CM embedding's coordinate
// along the bonafide axis. Stands in for a CM system's raw output.
std::vector<std::pair<std::string, double>> raw_cm_scores(const SynthData& data);

struct SplitCounts {
    std::size_t speakers = 0;
    std::size_t targets = 0;
    std::size_t nontargets = 0;
    std::size_t spoofs = 0;
};

struct SynthSummary {
    std::array<SplitCounts, 3> splits;
    double within_speaker_cosine = 0.0;   // mean SV cosine over target trials
    double between_speaker_cosine = 0.0;  // mean SV cosine over nontarget trials
    double cm_separation = 0.0;           // distance between bonafide and spoof CM means
    bool speakers_disjoint = false;
};

SynthSummary describe(const SynthConfig& cfg, const SynthData& data);
std::string format_summary(const SynthSummary& summary);

}  // namespace sasv
