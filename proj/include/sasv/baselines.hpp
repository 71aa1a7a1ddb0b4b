#pragma once

// Comparison systems built from an SV score and a standalone CM score:
// score sum, CM-then-SV cascade, and logistic-regression fusion.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "sasv/core.hpp"
#include "sasv/integration_model.hpp"

namespace sasv {

// Per-trial inputs for the baselines.
struct BaselineInput {
    Trial trial;
    double s_sv = 0.0;
    double s_cm = 0.0;
};

// `ID<TAB>score` lines, '#' comments allowed.
std::unordered_map<std::string, double> parse_cm_scores(std::string_view text, std::string_view source = "<memory>");
std::unordered_map<std::string, double> load_cm_scores(const std::filesystem::path& path);
std::string format_cm_scores(std::span<const std::pair<std::string, double>> scores);

// Where the CM score of a test utterance comes from: a score file, or the
// spoof score of a trained CmOnly integration model.
class CmScoreSource {
public:
    explicit CmScoreSource(std::unordered_map<std::string, double> scores) : source_(std::move(scores)) {}
    // Throws std::invalid_argument unless the model is in CmOnly mode.
    explicit CmScoreSource(IntegrationModel cm_model);

    // One CM score per trial in protocol order. Throws DataError naming the
    // first trial whose test id cannot be scored.
    std::vector<double> score(const Protocol& protocol, const EmbeddingStores* stores) const;

private:
    std::variant<std::unordered_map<std::string, double>, IntegrationModel> source_;
};

// SV cosine scores plus CM scores for every trial.
std::vector<BaselineInput> baseline_inputs(const Protocol& protocol, const EmbeddingStores& stores,
                                           const CmScoreSource& cm);

// Records carry s_sv, the CM score in s_spf, and the fused score in s_sasv.
inline double sum_fusion(double s_sv, double s_cm) { return s_sv + s_cm; }
std::vector<ScoreRecord> sum_fusion_scores(std::span<const BaselineInput> inputs);

// ---------------------------------------------------------------------------
// Cascade: reject on the CM score, then score with SV.

// Score every rejected trial gets: one below the smallest SV score in the set.
double cascade_floor(std::span<const BaselineInput> inputs);
double cascade_score(double s_sv, double s_cm, double threshold, double floor);
std::vector<ScoreRecord> cascade_scores(std::span<const BaselineInput> inputs, double threshold);

// Candidate thresholds: every distinct CM score and every midpoint between
// neighbouring distinct scores, ascending.
std::vector<double> cascade_candidates(std::span<const BaselineInput> dev);

// The candidate with the lowest dev SASV-EER; smallest threshold on ties.
// Throws DataError unless the dev set has target, nontarget and spoof trials.
double cascade_fit(std::span<const BaselineInput> dev);

// ---------------------------------------------------------------------------
// Logistic regression on (s_sv, s_cm), target = 1.

struct LogisticModel {
    double w_sv = 0.0;
    double w_cm = 0.0;
    double bias = 0.0;
};

struct LogregFitOptions {
    double learning_rate = 1e-2;
    std::size_t steps = 1000;
};

struct LogregFit {
    LogisticModel model;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

// Mean binary cross-entropy of the model on the inputs.
double logreg_loss(const LogisticModel& model, std::span<const BaselineInput> inputs);

// Full-batch Adam from all-zero parameters. Throws DataError on single-class input.
LogregFit logreg_fit(std::span<const BaselineInput> dev, const LogregFitOptions& options = {});
double logreg_score(const LogisticModel& model, double s_sv, double s_cm);
std::vector<ScoreRecord> logreg_scores(const LogisticModel& model, std::span<const BaselineInput> inputs);

// ---------------------------------------------------------------------------
// Fitted parameters in the shared checkpoint container.

std::vector<std::uint8_t> encode_cascade(double threshold);
double decode_cascade(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_logistic(const LogisticModel& model);
LogisticModel decode_logistic(std::span<const std::uint8_t> bytes);

}  // namespace sasv
