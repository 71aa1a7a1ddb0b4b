#include "sasv/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sasv/checkpoint.hpp"
#include "sasv/loss.hpp"
#include "sasv/metrics.hpp"
#include "sasv/training.hpp"

namespace sasv {

std::unordered_map<std::string, double> parse_cm_scores(std::string_view text, std::string_view source) {
    std::unordered_map<std::string, double> out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        const std::string where = std::string(source) + ":" + std::to_string(line_no) + ": ";
        const std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0) throw DataError(where + "expected 'ID<TAB>score'");
        const auto value = parse_double(line.substr(tab + 1));
        if (!value || !std::isfinite(*value)) throw DataError(where + "bad score");
        const std::string id(line.substr(0, tab));
        if (!out.emplace(id, *value).second) throw DataError(where + "duplicate id '" + id + "'");
    }
    return out;
}

std::unordered_map<std::string, double> load_cm_scores(const std::filesystem::path& path) {
    return parse_cm_scores(read_file(path), path.string());
}

std::string format_cm_scores(std::span<const std::pair<std::string, double>> scores) {
    std::string out;
    for (const auto& [id, s] : scores) {
        out += id;
        out += '\t';
        out += format_double(s);
        out += '\n';
    }
    return out;
}

CmScoreSource::CmScoreSource(IntegrationModel cm_model) : source_(std::move(cm_model)) {
    if (std::get<IntegrationModel>(source_).mode != InputMode::CmOnly) {
        throw std::invalid_argument("CM score source model must be a cm_only integration model");
    }
    std::get<IntegrationModel>(source_).set_norm_mode(nn::NormMode::Eval);
}

std::vector<double> CmScoreSource::score(const Protocol& protocol, const EmbeddingStores* stores) const {
    if (const auto* table = std::get_if<std::unordered_map<std::string, double>>(&source_)) {
        std::vector<double> out;
        out.reserve(protocol.trials.size());
        for (std::size_t i = 0; i < protocol.trials.size(); ++i) {
            const auto it = table->find(protocol.trials[i].test_id);
            if (it == table->end()) {
                throw DataError(protocol.name + ": trial " + std::to_string(i) + ": no CM score for '" +
                                protocol.trials[i].test_id + "'");
            }
            out.push_back(it->second);
        }
        return out;
    }
    if (stores == nullptr) throw std::invalid_argument("CM model scoring needs embedding stores");
    const auto& model = std::get<IntegrationModel>(source_);
    std::vector<double> out;
    for (const auto& r : score_protocol(model, protocol, *stores)) out.push_back(r.s_spf);
    return out;
}

std::vector<BaselineInput> baseline_inputs(const Protocol& protocol, const EmbeddingStores& stores,
                                           const CmScoreSource& cm) {
    const auto cm_scores = cm.score(protocol, &stores);
    std::vector<BaselineInput> out;
    out.reserve(protocol.trials.size());
    for (std::size_t i = 0; i < protocol.trials.size(); ++i) {
        const Trial& t = protocol.trials[i];
        if (!stores.sv.contains(t.enroll_id) || !stores.sv.contains(t.test_id)) {
            throw DataError(protocol.name + ": trial " + std::to_string(i) + " (" + t.enroll_id + ", " + t.test_id +
                            "): id not in SV store");
        }
        out.push_back({t, sv_score(t, stores), cm_scores[i]});
    }
    return out;
}

std::vector<ScoreRecord> sum_fusion_scores(std::span<const BaselineInput> inputs) {
    std::vector<ScoreRecord> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) out.push_back({in.trial, in.s_sv, in.s_cm, sum_fusion(in.s_sv, in.s_cm)});
    return out;
}

// ---------------------------------------------------------------------------

double cascade_floor(std::span<const BaselineInput> inputs) {
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& in : inputs) lowest = std::min(lowest, in.s_sv);
    return inputs.empty() ? -1.0 : lowest - 1.0;
}

double cascade_score(double s_sv, double s_cm, double threshold, double floor) {
    return s_cm < threshold ? floor : s_sv;
}

std::vector<ScoreRecord> cascade_scores(std::span<const BaselineInput> inputs, double threshold) {
    const double floor = cascade_floor(inputs);
    std::vector<ScoreRecord> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) {
        out.push_back({in.trial, in.s_sv, in.s_cm, cascade_score(in.s_sv, in.s_cm, threshold, floor)});
    }
    return out;
}

std::vector<double> cascade_candidates(std::span<const BaselineInput> dev) {
    std::vector<double> values;
    values.reserve(dev.size());
    for (const auto& in : dev) values.push_back(in.s_cm);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> out;
    out.reserve(2 * values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out.push_back(values[i]);
        if (i + 1 < values.size()) out.push_back(values[i] + 0.5 * (values[i + 1] - values[i]));
    }
    return out;
}

double cascade_fit(std::span<const BaselineInput> dev) {
    bool has[3] = {false, false, false};
    for (const auto& in : dev) has[static_cast<int>(in.trial.label)] = true;
    if (!has[0] || !has[1] || !has[2]) {
        throw DataError("cascade fit needs target, nontarget and spoof trials in the development set");
    }
    const double floor = cascade_floor(dev);
    std::vector<double> targets;
    std::vector<double> negatives;
    double best_eer = std::numeric_limits<double>::infinity();
    double best_threshold = 0.0;
    for (double threshold : cascade_candidates(dev)) {
        targets.clear();
        negatives.clear();
        for (const auto& in : dev) {
            const double s = cascade_score(in.s_sv, in.s_cm, threshold, floor);
            (in.trial.label == TrialLabel::Target ? targets : negatives).push_back(s);
        }
        const double e = eer(targets, negatives).eer;
        if (e < best_eer) {
            best_eer = e;
            best_threshold = threshold;
        }
    }
    return best_threshold;
}

// ---------------------------------------------------------------------------

namespace {

double logit(const LogisticModel& m, double s_sv, double s_cm) {
    return m.w_sv * s_sv + m.w_cm * s_cm + m.bias;
}

}  // namespace

double logreg_loss(const LogisticModel& model, std::span<const BaselineInput> inputs) {
    if (inputs.empty()) throw std::invalid_argument("logreg_loss: no inputs");
    double total = 0.0;
    for (const auto& in : inputs) {
        const double z = logit(model, in.s_sv, in.s_cm);
        const double y = in.trial.label == TrialLabel::Target ? 1.0 : 0.0;
        // -[y log p + (1-y) log(1-p)] with p = sigmoid(z)
        total += softplus(z) - y * z;
    }
    return total / static_cast<double>(inputs.size());
}

LogregFit logreg_fit(std::span<const BaselineInput> dev, const LogregFitOptions& options) {
    std::size_t targets = 0;
    for (const auto& in : dev) targets += in.trial.label == TrialLabel::Target ? 1 : 0;
    if (targets == 0 || targets == dev.size()) {
        throw DataError("logistic regression needs target and non-target or spoof trials");
    }

    LogregFit fit;
    std::vector<double> params(3, 0.0);  // w_sv, w_cm, bias
    std::vector<double> grads(3, 0.0);
    const std::vector<nn::ParamView> param_views{{"logreg", params}};
    const std::vector<nn::ParamView> grad_views{{"logreg", grads}};
    AdamState state;
    const AdamConfig adam{options.learning_rate, 0.9, 0.999, 1e-8};
    auto as_model = [&params] { return LogisticModel{params[0], params[1], params[2]}; };

    fit.initial_loss = logreg_loss(as_model(), dev);
    const double inv_n = 1.0 / static_cast<double>(dev.size());
    for (std::size_t step = 0; step < options.steps; ++step) {
        std::fill(grads.begin(), grads.end(), 0.0);
        const LogisticModel m = as_model();
        for (const auto& in : dev) {
            const double y = in.trial.label == TrialLabel::Target ? 1.0 : 0.0;
            const double residual = logreg_score(m, in.s_sv, in.s_cm) - y;
            grads[0] += residual * in.s_sv * inv_n;
            grads[1] += residual * in.s_cm * inv_n;
            grads[2] += residual * inv_n;
        }
        adam_step(state, param_views, grad_views, adam);
    }
    fit.model = as_model();
    fit.final_loss = logreg_loss(fit.model, dev);
    return fit;
}

double logreg_score(const LogisticModel& model, double s_sv, double s_cm) {
    const double z = logit(model, s_sv, s_cm);
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::vector<ScoreRecord> logreg_scores(const LogisticModel& model, std::span<const BaselineInput> inputs) {
    std::vector<ScoreRecord> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) out.push_back({in.trial, in.s_sv, in.s_cm, logreg_score(model, in.s_sv, in.s_cm)});
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_cascade(double threshold) {
    ByteWriter w;
    w.f64(threshold);
    return wrap_payload(PayloadType::CascadeBaseline, w.bytes());
}

double decode_cascade(std::span<const std::uint8_t> bytes) {
    const auto payload = unwrap_payload(bytes, PayloadType::CascadeBaseline);
    ByteReader r(payload);
    const double threshold = r.f64();
    r.expect_end();
    return threshold;
}

std::vector<std::uint8_t> encode_logistic(const LogisticModel& model) {
    ByteWriter w;
    w.f64(model.w_sv);
    w.f64(model.w_cm);
    w.f64(model.bias);
    return wrap_payload(PayloadType::LogisticBaseline, w.bytes());
}

LogisticModel decode_logistic(std::span<const std::uint8_t> bytes) {
    const auto payload = unwrap_payload(bytes, PayloadType::LogisticBaseline);
    ByteReader r(payload);
    LogisticModel m;
    m.w_sv = r.f64();
    m.w_cm = r.f64();
    m.bias = r.f64();
    r.expect_end();
    return m;
}

}  // namespace sasv
