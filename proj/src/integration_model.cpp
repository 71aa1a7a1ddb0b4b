#include "sasv/integration_model.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace sasv {

std::string_view to_string(InputMode mode) {
    switch (mode) {
        case InputMode::Concat: return "concat";
        case InputMode::CmOnly: return "cm_only";
        case InputMode::ConcatPlusEnroll: return "concat_plus_enroll";
    }
    return "?";
}

std::optional<InputMode> parse_input_mode(std::string_view token) {
    if (token == "concat") return InputMode::Concat;
    if (token == "cm_only") return InputMode::CmOnly;
    if (token == "concat_plus_enroll") return InputMode::ConcatPlusEnroll;
    return std::nullopt;
}

std::size_t input_dim(InputMode mode, std::size_t sv_dim, std::size_t cm_dim) {
    switch (mode) {
        case InputMode::Concat: return sv_dim + cm_dim;
        case InputMode::CmOnly: return cm_dim;
        case InputMode::ConcatPlusEnroll: return 2 * sv_dim + cm_dim;
    }
    return 0;
}

std::vector<double> assemble_input(InputMode mode, const Embedding* y_sv, const Embedding& x_sv,
                                   const Embedding& x_cm) {
    std::vector<double> out;
    switch (mode) {
        case InputMode::CmOnly:
            out = x_cm.values;
            break;
        case InputMode::Concat:
            out.reserve(x_sv.dim() + x_cm.dim());
            out.insert(out.end(), x_sv.values.begin(), x_sv.values.end());
            out.insert(out.end(), x_cm.values.begin(), x_cm.values.end());
            break;
        case InputMode::ConcatPlusEnroll:
            if (y_sv == nullptr) throw std::invalid_argument("assemble_input: concat_plus_enroll needs the enrollment embedding");
            if (y_sv->dim() != x_sv.dim()) {
                throw std::invalid_argument("assemble_input: enrollment and test SV embeddings differ in dimension");
            }
            out.reserve(y_sv->dim() + x_sv.dim() + x_cm.dim());
            out.insert(out.end(), y_sv->values.begin(), y_sv->values.end());
            out.insert(out.end(), x_sv.values.begin(), x_sv.values.end());
            out.insert(out.end(), x_cm.values.begin(), x_cm.values.end());
            break;
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<nn::ParamView> ModelGradients::parameters() {
    auto views = stack.parameters();
    views.push_back({"w", w});
    views.push_back({"alpha", std::span<double>(&alpha, 1)});
    return views;
}

IntegrationModel IntegrationModel::create(InputMode mode, std::size_t sv_dim, std::size_t cm_dim, Rng& rng) {
    if (sv_dim == 0 || cm_dim == 0) throw std::invalid_argument("IntegrationModel: embedding dimensions must be positive");
    IntegrationModel model;
    model.mode = mode;
    model.sv_dim = sv_dim;
    model.cm_dim = cm_dim;
    model.network = nn::DenseStack(sasv::input_dim(mode, sv_dim, cm_dim),
                                   std::vector<std::size_t>(kHiddenSizes.begin(), kHiddenSizes.end()),
                                   kSpoofEmbeddingDim, rng);
    std::vector<double> w(kSpoofEmbeddingDim);
    do {
        for (double& v : w) v = rng.gaussian();
    } while (norm(w) == 0.0);
    model.w = length_normalize(w);
    model.alpha = 1.0;
    return model;
}

std::vector<double> IntegrationModel::assemble(const Trial& trial, const EmbeddingStores& stores) const {
    if (stores.sv.dimension() != sv_dim || stores.cm.dimension() != cm_dim) {
        throw DataError("embedding stores have dimensions (" + std::to_string(stores.sv.dimension()) + ", " +
                        std::to_string(stores.cm.dimension()) + "), model expects (" + std::to_string(sv_dim) +
                        ", " + std::to_string(cm_dim) + ")");
    }
    const Embedding& x_sv = stores.sv.at(trial.test_id);
    const Embedding& x_cm = stores.cm.at(trial.test_id);
    const Embedding* y_sv = mode == InputMode::ConcatPlusEnroll ? &stores.sv.at(trial.enroll_id) : nullptr;
    return assemble_input(mode, y_sv, x_sv, x_cm);
}

nn::Matrix IntegrationModel::assemble_batch(std::span<const Trial> trials, const EmbeddingStores& stores) const {
    nn::Matrix batch(trials.size(), input_dim());
    for (std::size_t n = 0; n < trials.size(); ++n) {
        const auto row = assemble(trials[n], stores);
        std::copy(row.begin(), row.end(), batch.row(n).begin());
    }
    return batch;
}

SpoofOutput IntegrationModel::spoof_score(const nn::Matrix& input) const {
    if (input.cols != input_dim()) throw std::invalid_argument("spoof_score: input width does not match the model");
    SpoofOutput out;
    out.embedding = network.forward_eval(input);
    out.score = nn::cosine_head_forward(w, out.embedding);
    return out;
}

std::vector<double> IntegrationModel::fused_forward(const nn::Matrix& input, std::span<const double> s_sv,
                                                    ModelTape& tape) {
    if (input.cols != input_dim()) throw std::invalid_argument("fused_forward: input width does not match the model");
    if (s_sv.size() != input.rows) throw std::invalid_argument("fused_forward: one SV score per row expected");
    tape.e_spf = network.forward(input, &tape.stack);
    const auto s_spf = nn::cosine_head_forward(w, tape.e_spf, &tape.head);
    tape.s_sv.assign(s_sv.begin(), s_sv.end());
    std::vector<double> fused(input.rows);
    for (std::size_t n = 0; n < input.rows; ++n) fused[n] = alpha * s_sv[n] + s_spf[n];
    return fused;
}

ModelGradients IntegrationModel::backward(const ModelTape& tape, std::span<const double> d_sasv) const {
    if (!tape.stack.recorded) throw std::logic_error("IntegrationModel::backward called without a forward pass");
    if (d_sasv.size() != tape.s_sv.size()) throw std::invalid_argument("backward: gradient size does not match batch");
    ModelGradients grads;
    grads.alpha = 0.0;
    for (std::size_t n = 0; n < d_sasv.size(); ++n) grads.alpha += d_sasv[n] * tape.s_sv[n];
    nn::Matrix d_embedding;
    nn::cosine_head_backward(w, tape.e_spf, tape.head, d_sasv, d_embedding, grads.w);
    grads.stack = network.backward(tape.stack, d_embedding);
    return grads;
}

std::vector<nn::ParamView> IntegrationModel::parameters() {
    auto views = network.parameters();
    views.push_back({"w", w});
    views.push_back({"alpha", std::span<double>(&alpha, 1)});
    return views;
}

// ---------------------------------------------------------------------------

double sv_score(const Trial& trial, const EmbeddingStores& stores) {
    return cosine(stores.sv.at(trial.enroll_id), stores.sv.at(trial.test_id));
}

namespace {

constexpr std::size_t kScoringBatch = 256;

void score_range(const IntegrationModel& model, std::span<const Trial> trials, const EmbeddingStores& stores,
                 std::span<ScoreRecord> out) {
    for (std::size_t begin = 0; begin < trials.size(); begin += kScoringBatch) {
        const std::size_t end = std::min(trials.size(), begin + kScoringBatch);
        const auto chunk = trials.subspan(begin, end - begin);
        const auto spoof = model.spoof_score(model.assemble_batch(chunk, stores));
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            ScoreRecord& r = out[begin + i];
            r.trial = chunk[i];
            r.s_sv = sv_score(chunk[i], stores);
            r.s_spf = spoof.score[i];
            r.s_sasv = model.alpha * r.s_sv + r.s_spf;
        }
    }
}

}  // namespace

ScoreRecord sasv_score(const IntegrationModel& model, const Trial& trial, const EmbeddingStores& stores) {
    ScoreRecord record;
    score_range(model, std::span<const Trial>(&trial, 1), stores, std::span<ScoreRecord>(&record, 1));
    return record;
}

std::vector<ScoreRecord> score_protocol(const IntegrationModel& model, const Protocol& protocol,
                                        const EmbeddingStores& stores, unsigned threads) {
    check_resolvable(protocol, stores);
    std::vector<ScoreRecord> records(protocol.trials.size());
    const std::span<const Trial> trials(protocol.trials);
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, trials.size()));
    if (workers == 1) {
        score_range(model, trials, stores, records);
        return records;
    }
    const std::size_t per = (trials.size() + workers - 1) / workers;
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < workers; ++t) {
            const std::size_t begin = std::min(trials.size(), t * per);
            const std::size_t end = std::min(trials.size(), begin + per);
            pool.emplace_back([&, t, begin, end] {
                try {
                    score_range(model, trials.subspan(begin, end - begin), stores,
                                std::span<ScoreRecord>(records).subspan(begin, end - begin));
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return records;
}

}  // namespace sasv
