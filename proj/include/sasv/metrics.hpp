#pragma once

// Equal error rates and the three SASV trial-pair metrics.
//
// Threshold convention: a positive is falsely rejected when its score is
// strictly below the threshold (FRR uses <), a negative is falsely accepted
// when its score is at or above it (FAR uses >=).

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sasv/core.hpp"

namespace sasv {

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

// Sweeps the threshold over every distinct score plus one point above the
// largest score, and linearly interpolates FAR and FRR at the first point
// where FRR >= FAR. Both lists must be nonempty and NaN-free
// (std::invalid_argument otherwise).
EerResult eer(std::span<const double> positives, std::span<const double> negatives);

enum class ScoreField { Sv, Spf, Sasv };

std::string_view to_string(ScoreField field);
std::optional<ScoreField> parse_score_field(std::string_view token);
double field_value(const ScoreRecord& record, ScoreField field);

struct EerReport {
    std::optional<EerResult> sv;    // target vs nontarget
    std::optional<EerResult> spf;   // target vs spoof
    std::optional<EerResult> sasv;  // target vs nontarget + spoof
    std::size_t targets = 0;
    std::size_t nontargets = 0;
    std::size_t spoofs = 0;
};

// Sub-metrics without negatives are left empty. Throws DataError when there
// are no target trials.
EerReport sasv_report(std::span<const ScoreRecord> records, ScoreField field);

// Table layout: one row, EERs in percent at 2 decimals, "-" for absent ones.
std::string format_report_table(const EerReport& report);
// CSV `metric,eer_percent,threshold` at full precision.
std::string format_report_csv(const EerReport& report);

// CSV `enroll_id,test_id,label,s_sv,s_spf,s_sasv`, 17 significant digits.
std::string format_scores_csv(std::span<const ScoreRecord> records);
void export_scores(std::span<const ScoreRecord> records, const std::filesystem::path& path);
std::vector<ScoreRecord> parse_scores_csv(std::string_view text, std::string_view source = "<memory>");
std::vector<ScoreRecord> load_scores_csv(const std::filesystem::path& path);

std::string format_double17(double x);

}  // namespace sasv
