#pragma once

// Adam training of the integration model with dev-set model selection.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sasv/core.hpp"
#include "sasv/integration_model.hpp"
#include "sasv/loss.hpp"
#include "sasv/neuralnet.hpp"

namespace sasv {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Moment accumulators mirror the parameter list they were first used with.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t t = 0;
};

// One bias-corrected Adam update. All gradients are checked before anything
// is modified; a non-finite entry throws NumericError naming the tensor and
// index.
void adam_step(AdamState& state, std::span<const nn::ParamView> params, std::span<const nn::ParamView> grads,
               const AdamConfig& cfg);

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 24;
    std::size_t epochs = 40;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    bool shuffle = true;
    OcsConfig loss;
    // Dev scoring workers. Does not change any result.
    unsigned threads = 1;

    AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }
    // Throws ConfigError on invalid settings.
    void validate() const;
};

struct Checkpoint {
    IntegrationModel model;
    TrainConfig config;
    bool length_normalized = false;
    double selection_metric = 0.0;  // dev SASV-EER of this model
    std::uint64_t epoch = 0;        // 1-based epoch it was taken after
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// Throws CheckpointError on any container or payload problem.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::optional<double> dev_sv_eer;
    std::optional<double> dev_spf_eer;
    double dev_sasv_eer = 0.0;
};

struct TrainResult {
    Checkpoint best;
    std::vector<EpochStats> history;
};

std::string format_history_csv(std::span<const EpochStats> history);

using EpochCallback = std::function<void(const EpochStats&)>;

// Per epoch: shuffle (if enabled), run mini-batches in batch-norm train mode
// (a final batch of one trial is dropped), then score the dev protocol in
// eval mode. Returns the model with the lowest dev SASV-EER, earliest epoch
// on ties. `rng` drives the shuffles only.
TrainResult train(IntegrationModel model, const Protocol& train_protocol, const Protocol& dev_protocol,
                  const EmbeddingStores& stores, const TrainConfig& cfg, Rng& rng,
                  const EpochCallback& on_epoch = {});

// Same, with the shuffle generator seeded from cfg.seed.
TrainResult train(IntegrationModel model, const Protocol& train_protocol, const Protocol& dev_protocol,
                  const EmbeddingStores& stores, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace sasv
