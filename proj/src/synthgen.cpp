#include "sasv/synthgen.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace sasv {

namespace {

std::string speaker_id(std::size_t s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "spk%04zu", s);
    return buf;
}

std::string utterance_id(std::size_t s, char kind, std::size_t k) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "spk%04zu-%c%03zu", s, kind, k);
    return buf;
}

std::vector<double> gaussian_vector(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.gaussian();
    return v;
}

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
    while (true) {
        auto v = gaussian_vector(rng, dim);
        if (norm(v) > 0.0) return length_normalize(v);
    }
}

// normalize(center + scale * g)
std::vector<double> noisy_unit(Rng& rng, const std::vector<double>& center, double scale) {
    std::vector<double> v = center;
    for (double& x : v) x += scale * rng.gaussian();
    return length_normalize(v);
}

std::vector<double> cm_point(Rng& rng, std::size_t dim, double axis_value, double noise) {
    std::vector<double> v(dim);
    for (double& x : v) x = noise * rng.gaussian();
    v[0] += axis_value;
    return v;
}

}  // namespace

void SynthConfig::validate() const {
    if (n_speakers < 6) throw ConfigError("synth: need at least 6 speakers (2 per split)");
    if (utts_per_speaker < 1) throw ConfigError("synth: utts_per_speaker must be positive");
    if (sv_dim < 2 || cm_dim < 2) throw ConfigError("synth: embedding dimensions must be at least 2");
    if (!(sv_noise > 0.0) || !(cm_noise > 0.0)) throw ConfigError("synth: noise levels must be positive");
    if (!(spoof_sv_offset >= 0.0) || !(cm_separation >= 0.0)) {
        throw ConfigError("synth: spoof_sv_offset and cm_separation must be non-negative");
    }
    if (!std::isfinite(sv_noise + cm_noise + spoof_sv_offset + cm_separation)) {
        throw ConfigError("synth: parameters must be finite");
    }
}

SynthData generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t n = cfg.n_speakers;

    const auto spoof_direction = random_unit(rng, cfg.sv_dim);
    std::vector<std::vector<double>> centroids;
    centroids.reserve(n);
    for (std::size_t s = 0; s < n; ++s) centroids.push_back(random_unit(rng, cfg.sv_dim));

    SynthData data{EmbeddingStores{EmbeddingStore(StoreKind::Sv, cfg.sv_dim), EmbeddingStore(StoreKind::Cm, cfg.cm_dim)},
                   {}, {}, {}, {}};
    const double half = 0.5 * cfg.cm_separation;
    for (std::size_t s = 0; s < n; ++s) {
        data.stores.sv.add({speaker_id(s), noisy_unit(rng, centroids[s], cfg.sv_noise)});
        for (std::size_t k = 0; k < cfg.utts_per_speaker; ++k) {
            const auto id = utterance_id(s, 'b', k);
            data.stores.sv.add({id, noisy_unit(rng, centroids[s], cfg.sv_noise)});
            data.stores.cm.add({id, cm_point(rng, cfg.cm_dim, half, cfg.cm_noise)});
        }
        std::vector<double> spoof_center = centroids[s];
        for (std::size_t j = 0; j < cfg.sv_dim; ++j) spoof_center[j] += cfg.spoof_sv_offset * spoof_direction[j];
        for (std::size_t k = 0; k < cfg.spoofs_per_speaker; ++k) {
            const auto id = utterance_id(s, 's', k);
            data.stores.sv.add({id, noisy_unit(rng, spoof_center, cfg.sv_noise)});
            data.stores.cm.add({id, cm_point(rng, cfg.cm_dim, -half, cfg.cm_noise)});
        }
    }

    const std::size_t n_dev = n / 3;
    const std::size_t n_eval = n / 3;
    const std::size_t n_train = n - n_dev - n_eval;
    const std::array<std::size_t, 3> begin{0, n_train, n_train + n_dev};
    const std::array<std::size_t, 3> size{n_train, n_dev, n_eval};
    const std::array<const char*, 3> names{"train", "dev", "eval"};
    std::array<Protocol*, 3> protocols{&data.train, &data.dev, &data.eval};

    for (std::size_t split = 0; split < 3; ++split) {
        Protocol& p = *protocols[split];
        p.name = names[split];
        for (std::size_t i = 0; i < size[split]; ++i) data.speakers[split].push_back(speaker_id(begin[split] + i));
        for (std::size_t i = 0; i < size[split]; ++i) {
            const std::size_t s = begin[split] + i;
            const std::string enroll = speaker_id(s);
            for (std::size_t k = 0; k < cfg.utts_per_speaker; ++k) {
                p.trials.push_back({enroll, utterance_id(s, 'b', k), TrialLabel::Target});
            }
            for (std::size_t k = 0; k < cfg.utts_per_speaker; ++k) {
                // Another speaker of the same split claims this utterance.
                std::size_t other = begin[split] + static_cast<std::size_t>(rng.below(size[split] - 1));
                if (other >= s) ++other;
                p.trials.push_back({speaker_id(other), utterance_id(s, 'b', k), TrialLabel::NonTarget});
            }
            for (std::size_t k = 0; k < cfg.spoofs_per_speaker; ++k) {
                p.trials.push_back({enroll, utterance_id(s, 's', k), TrialLabel::Spoof});
            }
        }
    }
    return data;
}

std::vector<std::pair<std::string, double>> raw_cm_scores(const SynthData& data) {
    std::vector<std::pair<std::string, double>> out;
    out.reserve(data.stores.cm.size());
    for (const auto& e : data.stores.cm.entries()) out.emplace_back(e.id, e.values[0]);
    return out;
}

SynthSummary describe(const SynthConfig& cfg, const SynthData& data) {
    SynthSummary summary;
    const std::array<const Protocol*, 3> protocols{&data.train, &data.dev, &data.eval};
    double within = 0.0;
    double between = 0.0;
    std::size_t n_within = 0;
    std::size_t n_between = 0;
    for (std::size_t split = 0; split < 3; ++split) {
        auto& c = summary.splits[split];
        c.speakers = data.speakers[split].size();
        c.targets = protocols[split]->count(TrialLabel::Target);
        c.nontargets = protocols[split]->count(TrialLabel::NonTarget);
        c.spoofs = protocols[split]->count(TrialLabel::Spoof);
        for (const auto& t : protocols[split]->trials) {
            if (t.label == TrialLabel::Target) {
                within += cosine(data.stores.sv.at(t.enroll_id), data.stores.sv.at(t.test_id));
                ++n_within;
            } else if (t.label == TrialLabel::NonTarget) {
                between += cosine(data.stores.sv.at(t.enroll_id), data.stores.sv.at(t.test_id));
                ++n_between;
            }
        }
    }
    summary.within_speaker_cosine = n_within ? within / static_cast<double>(n_within) : 0.0;
    summary.between_speaker_cosine = n_between ? between / static_cast<double>(n_between) : 0.0;

    std::vector<double> bona(cfg.cm_dim, 0.0);
    std::vector<double> spoof(cfg.cm_dim, 0.0);
    std::size_t n_bona = 0;
    std::size_t n_spoof = 0;
    for (const auto& e : data.stores.cm.entries()) {
        const bool is_spoof = e.id.find("-s") != std::string::npos;
        auto& acc = is_spoof ? spoof : bona;
        for (std::size_t j = 0; j < cfg.cm_dim; ++j) acc[j] += e.values[j];
        (is_spoof ? n_spoof : n_bona) += 1;
    }
    if (n_bona && n_spoof) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < cfg.cm_dim; ++j) {
            const double d = bona[j] / static_cast<double>(n_bona) - spoof[j] / static_cast<double>(n_spoof);
            d2 += d * d;
        }
        summary.cm_separation = std::sqrt(d2);
    }

    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto& split : data.speakers) {
        total += split.size();
        seen.insert(split.begin(), split.end());
    }
    summary.speakers_disjoint = seen.size() == total;
    return summary;
}

std::string format_summary(const SynthSummary& summary) {
    const std::array<const char*, 3> names{"train", "dev", "eval"};
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-6s %8s %8s %10s %8s\n", "split", "speakers", "target", "nontarget", "spoof");
    out += buf;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& c = summary.splits[i];
        std::snprintf(buf, sizeof(buf), "%-6s %8zu %8zu %10zu %8zu\n", names[i], c.speakers, c.targets, c.nontargets,
                      c.spoofs);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "mean within-speaker cosine  %.6f\nmean between-speaker cosine %.6f\nCM class separation         "
                  "%.6f\nspeaker sets disjoint       %s\n",
                  summary.within_speaker_cosine, summary.between_speaker_cosine, summary.cm_separation,
                  summary.speakers_disjoint ? "yes" : "no");
    out += buf;
    return out;
}

}  // namespace sasv
