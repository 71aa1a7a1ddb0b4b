#pragma once

// Spoofing-aware integration model.
//
// The network sees only test-utterance embeddings (plus the enrollment SV
// embedding in ConcatPlusEnroll mode) and produces a 64-dim spoofing
// embedding e_spf. Its spoof score is cos(w, e_spf) for a learned
// genuine-speech direction w. The SV score is the cosine between enrollment
// and test SV embeddings, computed outside the network, and the two are
// fused as s_sasv = alpha * s_sv + s_spf.

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sasv/core.hpp"
#include "sasv/neuralnet.hpp"

namespace sasv {

enum class InputMode {
    Concat,            // x_sv | x_cm
    CmOnly,            // x_cm
    ConcatPlusEnroll,  // y_sv | x_sv | x_cm
};

std::string_view to_string(InputMode mode);
std::optional<InputMode> parse_input_mode(std::string_view token);

inline constexpr std::array<std::size_t, 3> kHiddenSizes{256, 128, 64};
inline constexpr std::size_t kSpoofEmbeddingDim = 64;

std::size_t input_dim(InputMode mode, std::size_t sv_dim, std::size_t cm_dim);

// Concatenates the embeddings the mode needs. y_sv is required only for
// ConcatPlusEnroll; a missing one or an enrollment/test SV dimension
// mismatch throws std::invalid_argument.
std::vector<double> assemble_input(InputMode mode, const Embedding* y_sv, const Embedding& x_sv,
                                   const Embedding& x_cm);

struct SpoofOutput {
    nn::Matrix embedding;       // e_spf, [N x 64]
    std::vector<double> score;  // s_spf, [N]
};

// Everything a training step needs to differentiate the fused score.
struct ModelTape {
    nn::GradientTape stack;
    nn::CosineHeadCache head;
    nn::Matrix e_spf;
    std::vector<double> s_sv;
};

struct ModelGradients {
    nn::StackGradients stack;
    std::vector<double> w;
    double alpha = 0.0;

    // Same order and names as IntegrationModel::parameters().
    std::vector<nn::ParamView> parameters();
};

class IntegrationModel {
public:
    IntegrationModel() = default;

    // Initialization order: hidden layers, projection, then w (a random unit
    // vector). alpha starts at 1.
    static IntegrationModel create(InputMode mode, std::size_t sv_dim, std::size_t cm_dim, Rng& rng);

    InputMode mode = InputMode::Concat;
    std::size_t sv_dim = 0;
    std::size_t cm_dim = 0;
    nn::DenseStack network;
    std::vector<double> w;
    double alpha = 1.0;

    std::size_t input_dim() const { return network.input_dim(); }
    void set_norm_mode(nn::NormMode m) { network.set_mode(m); }

    // Assembled network input for one trial / a run of trials.
    std::vector<double> assemble(const Trial& trial, const EmbeddingStores& stores) const;
    nn::Matrix assemble_batch(std::span<const Trial> trials, const EmbeddingStores& stores) const;

    // Eval-mode spoof scores (running batch-norm statistics, no mutation).
    SpoofOutput spoof_score(const nn::Matrix& input) const;

    // Training-mode fused scores for a batch; records into `tape` for
    // backward(). Updates batch-norm running statistics when in train mode.
    std::vector<double> fused_forward(const nn::Matrix& input, std::span<const double> s_sv, ModelTape& tape);

    // Gradients of a loss with respect to all trainable parameters, given
    // d loss / d s_sasv per batch row.
    ModelGradients backward(const ModelTape& tape, std::span<const double> d_sasv) const;

    // Trainable tensors: network (bn.gamma, bn.beta, hidden*, projection),
    // then w, then alpha.
    std::vector<nn::ParamView> parameters();
};

// SV cosine between the trial's enrollment and test SV embeddings.
double sv_score(const Trial& trial, const EmbeddingStores& stores);

// Eval-mode score for one trial.
ScoreRecord sasv_score(const IntegrationModel& model, const Trial& trial, const EmbeddingStores& stores);

// One record per trial, in protocol order. `threads` > 1 splits the trials
// into contiguous chunks; the result does not depend on the thread count.
std::vector<ScoreRecord> score_protocol(const IntegrationModel& model, const Protocol& protocol,
                                        const EmbeddingStores& stores, unsigned threads = 1);

}  // namespace sasv
