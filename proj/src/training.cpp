#include "sasv/training.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sasv/checkpoint.hpp"
#include "sasv/metrics.hpp"

namespace sasv {

void adam_step(AdamState& state, std::span<const nn::ParamView> params, std::span<const nn::ParamView> grads,
               const AdamConfig& cfg) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter and gradient lists differ");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].values.size() != grads[i].values.size()) {
            throw std::invalid_argument("adam_step: shape mismatch for '" + params[i].name + "'");
        }
        const auto g = grads[i].values;
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (!std::isfinite(g[k])) {
                throw NumericError("non-finite gradient for parameter '" + params[i].name + "' at index " +
                                   std::to_string(k));
            }
        }
    }
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.values.size(), 0.0);
            state.v.emplace_back(p.values.size(), 0.0);
        }
    }
    if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: optimizer state does not match parameters");

    ++state.t;
    const double t = static_cast<double>(state.t);
    const double correction1 = 1.0 - std::pow(cfg.beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].values;
        const auto g = grads[i].values;
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (m.size() != p.size()) throw std::invalid_argument("adam_step: optimizer state shape mismatch");
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            const double m_hat = m[k] / correction1;
            const double v_hat = v[k] / correction2;
            p[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be finite and >= 0");
    if (batch_size < 2) throw ConfigError("batch size must be at least 2 (train-mode batch norm needs two trials)");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam beta1 must be in [0, 1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam beta2 must be in [0, 1)");
    if (!(adam_epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    loss.validate();
}

// ---------------------------------------------------------------------------

namespace {

void write_linear(ByteWriter& w, const nn::LinearLayer& layer) {
    w.u64(layer.out_features());
    w.u64(layer.in_features());
    w.f64s(layer.weight.data);
    w.f64s(layer.bias);
}

nn::LinearLayer read_linear(ByteReader& r, std::size_t expected_in, std::size_t expected_out) {
    const std::uint64_t out = r.u64();
    const std::uint64_t in = r.u64();
    if (in != expected_in || out != expected_out) {
        throw CheckpointError(CheckpointError::Kind::Malformed, "checkpoint layer has unexpected shape");
    }
    nn::LinearLayer layer(in, out);
    layer.weight.data = r.f64s();
    layer.bias = r.f64s();
    if (layer.weight.data.size() != in * out || layer.bias.size() != out) {
        throw CheckpointError(CheckpointError::Kind::Malformed, "checkpoint layer has inconsistent sizes");
    }
    return layer;
}

void require_size(const std::vector<double>& v, std::size_t n, const char* what) {
    if (v.size() != n) {
        throw CheckpointError(CheckpointError::Kind::Malformed, std::string("checkpoint field '") + what + "' has wrong size");
    }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    const IntegrationModel& m = ckpt.model;
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(m.mode));
    w.u64(m.sv_dim);
    w.u64(m.cm_dim);
    w.u8(ckpt.length_normalized ? 1 : 0);

    const auto& bn = m.network.bn;
    w.f64s(bn.gamma);
    w.f64s(bn.beta);
    w.f64s(bn.running_mean);
    w.f64s(bn.running_var);
    w.f64(bn.momentum);
    w.f64(bn.epsilon);
    w.f64(m.network.activation.negative_slope);
    w.u64(m.network.hidden.size());
    for (const auto& layer : m.network.hidden) write_linear(w, layer);
    write_linear(w, m.network.projection);
    w.f64s(m.w);
    w.f64(m.alpha);

    const TrainConfig& c = ckpt.config;
    w.f64(c.learning_rate);
    w.u64(c.batch_size);
    w.u64(c.epochs);
    w.f64(c.adam_beta1);
    w.f64(c.adam_beta2);
    w.f64(c.adam_epsilon);
    w.u64(c.seed);
    w.u8(c.shuffle ? 1 : 0);
    w.f64(c.loss.beta);
    w.f64(c.loss.m0);
    w.f64(c.loss.m1);

    w.f64(ckpt.selection_metric);
    w.u64(ckpt.epoch);
    return wrap_payload(PayloadType::IntegrationModel, w.bytes());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    using Kind = CheckpointError::Kind;
    const auto payload = unwrap_payload(bytes, PayloadType::IntegrationModel);
    ByteReader r(payload);
    Checkpoint ckpt;
    IntegrationModel& m = ckpt.model;

    const std::uint32_t mode = r.u32();
    if (mode > static_cast<std::uint32_t>(InputMode::ConcatPlusEnroll)) throw CheckpointError(Kind::Malformed, "unknown input mode");
    m.mode = static_cast<InputMode>(mode);
    m.sv_dim = r.u64();
    m.cm_dim = r.u64();
    if (m.sv_dim == 0 || m.cm_dim == 0) throw CheckpointError(Kind::Malformed, "zero embedding dimension");
    ckpt.length_normalized = r.u8() != 0;

    const std::size_t in_dim = input_dim(m.mode, m.sv_dim, m.cm_dim);
    auto& bn = m.network.bn;
    bn.gamma = r.f64s();
    bn.beta = r.f64s();
    bn.running_mean = r.f64s();
    bn.running_var = r.f64s();
    require_size(bn.gamma, in_dim, "bn.gamma");
    require_size(bn.beta, in_dim, "bn.beta");
    require_size(bn.running_mean, in_dim, "bn.running_mean");
    require_size(bn.running_var, in_dim, "bn.running_var");
    bn.momentum = r.f64();
    bn.epsilon = r.f64();
    bn.mode = nn::NormMode::Eval;
    m.network.activation.negative_slope = r.f64();

    if (r.u64() != kHiddenSizes.size()) throw CheckpointError(Kind::Malformed, "unexpected number of hidden layers");
    std::size_t in = in_dim;
    for (std::size_t h : kHiddenSizes) {
        m.network.hidden.push_back(read_linear(r, in, h));
        in = h;
    }
    m.network.projection = read_linear(r, in, kSpoofEmbeddingDim);
    m.w = r.f64s();
    require_size(m.w, kSpoofEmbeddingDim, "w");
    m.alpha = r.f64();

    TrainConfig& c = ckpt.config;
    c.learning_rate = r.f64();
    c.batch_size = r.u64();
    c.epochs = r.u64();
    c.adam_beta1 = r.f64();
    c.adam_beta2 = r.f64();
    c.adam_epsilon = r.f64();
    c.seed = r.u64();
    c.shuffle = r.u8() != 0;
    c.loss.beta = r.f64();
    c.loss.m0 = r.f64();
    c.loss.m1 = r.f64();

    ckpt.selection_metric = r.f64();
    ckpt.epoch = r.u64();
    r.expect_end();
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    write_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_bytes(path));
}

// ---------------------------------------------------------------------------

std::string format_history_csv(std::span<const EpochStats> history) {
    std::string out = "epoch,train_loss,dev_sv_eer,dev_spf_eer,dev_sasv_eer\n";
    for (const auto& e : history) {
        out += std::to_string(e.epoch);
        out += ',' + format_double17(e.train_loss);
        out += ',' + (e.dev_sv_eer ? format_double17(*e.dev_sv_eer) : std::string());
        out += ',' + (e.dev_spf_eer ? format_double17(*e.dev_spf_eer) : std::string());
        out += ',' + format_double17(e.dev_sasv_eer);
        out += '\n';
    }
    return out;
}

namespace {

void require_classes(const Protocol& protocol, const char* role) {
    const std::size_t targets = protocol.count(TrialLabel::Target);
    if (protocol.trials.empty()) throw DataError(std::string(role) + " protocol '" + protocol.name + "' is empty");
    if (targets == 0 || targets == protocol.trials.size()) {
        throw DataError(std::string(role) + " protocol '" + protocol.name +
                        "' needs at least one target and one non-target or spoof trial");
    }
}

}  // namespace

TrainResult train(IntegrationModel model, const Protocol& train_protocol, const Protocol& dev_protocol,
                  const EmbeddingStores& stores, const TrainConfig& cfg, Rng& rng, const EpochCallback& on_epoch) {
    cfg.validate();
    require_classes(train_protocol, "training");
    require_classes(dev_protocol, "development");
    if (train_protocol.trials.size() < 2) throw DataError("training protocol needs at least two trials");
    check_resolvable(train_protocol, stores);
    check_resolvable(dev_protocol, stores);

    // Inputs are frozen, so assemble them once.
    const std::size_t n = train_protocol.trials.size();
    const nn::Matrix inputs = model.assemble_batch(train_protocol.trials, stores);
    std::vector<double> s_sv(n);
    std::vector<int> classes(n);
    for (std::size_t i = 0; i < n; ++i) {
        s_sv[i] = sv_score(train_protocol.trials[i], stores);
        classes[i] = class_index(train_protocol.trials[i].label);
    }

    const AdamConfig adam = cfg.adam();
    AdamState state;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    double best = std::numeric_limits<double>::infinity();
    ModelTape tape;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle) rng.shuffle(order);
        model.set_norm_mode(nn::NormMode::Train);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t size = std::min(cfg.batch_size, n - start);
            if (size < 2) break;
            nn::Matrix batch(size, inputs.cols);
            std::vector<double> batch_sv(size);
            std::vector<int> batch_z(size);
            for (std::size_t b = 0; b < size; ++b) {
                const std::size_t idx = order[start + b];
                const auto src = inputs.row(idx);
                std::copy(src.begin(), src.end(), batch.row(b).begin());
                batch_sv[b] = s_sv[idx];
                batch_z[b] = classes[idx];
            }
            const auto fused = model.fused_forward(batch, batch_sv, tape);
            const LossResult loss = ocs_loss(cfg.loss, fused, batch_z);
            if (!std::isfinite(loss.loss)) {
                throw NumericError("non-finite training loss in epoch " + std::to_string(epoch));
            }
            auto grads = model.backward(tape, loss.grad);
            const auto params = model.parameters();
            const auto grad_views = grads.parameters();
            adam_step(state, params, grad_views, adam);
            loss_sum += loss.loss * static_cast<double>(size);
            seen += size;
        }

        model.set_norm_mode(nn::NormMode::Eval);
        const auto dev_records = score_protocol(model, dev_protocol, stores, cfg.threads);
        const EerReport report = sasv_report(dev_records, ScoreField::Sasv);

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(seen);
        if (report.sv) stats.dev_sv_eer = report.sv->eer;
        if (report.spf) stats.dev_spf_eer = report.spf->eer;
        stats.dev_sasv_eer = report.sasv->eer;
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats);

        if (stats.dev_sasv_eer < best) {
            best = stats.dev_sasv_eer;
            result.best = Checkpoint{model, cfg, false, stats.dev_sasv_eer, epoch};
        }
    }
    return result;
}

TrainResult train(IntegrationModel model, const Protocol& train_protocol, const Protocol& dev_protocol,
                  const EmbeddingStores& stores, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    Rng rng(cfg.seed);
    return train(std::move(model), train_protocol, dev_protocol, stores, cfg, rng, on_epoch);
}

}  // namespace sasv
