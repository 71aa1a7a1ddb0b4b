#include "sasv/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace sasv {

namespace {

std::vector<double> sorted_copy(std::span<const double> scores, const char* which) {
    if (scores.empty()) throw std::invalid_argument(std::string("eer: no ") + which + " scores");
    std::vector<double> out(scores.begin(), scores.end());
    for (double s : out) {
        if (std::isnan(s)) throw std::invalid_argument(std::string("eer: NaN in ") + which + " scores");
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

EerResult eer(std::span<const double> positives, std::span<const double> negatives) {
    const auto pos = sorted_copy(positives, "positive");
    const auto neg = sorted_copy(negatives, "negative");
    const double n_pos = static_cast<double>(pos.size());
    const double n_neg = static_cast<double>(neg.size());

    // Merge-walk the distinct thresholds in increasing order. At threshold t,
    // i = #positives < t and j = #negatives < t.
    std::size_t i = 0;
    std::size_t j = 0;
    double prev_frr = 0.0;
    double prev_far = 1.0;
    double prev_t = std::min(pos.front(), neg.front());
    bool first = true;
    while (i < pos.size() || j < neg.size()) {
        const double t = (j == neg.size() || (i < pos.size() && pos[i] < neg[j])) ? pos[i] : neg[j];
        const double frr = static_cast<double>(i) / n_pos;
        const double far = (n_neg - static_cast<double>(j)) / n_neg;
        if (!first && frr >= far) {
            if (frr == far) return {frr, t};
            const double d_prev = prev_frr - prev_far;
            const double d_cur = frr - far;
            const double a = -d_prev / (d_cur - d_prev);
            return {prev_frr + a * (frr - prev_frr), prev_t + a * (t - prev_t)};
        }
        first = false;
        prev_frr = frr;
        prev_far = far;
        prev_t = t;
        while (i < pos.size() && pos[i] == t) ++i;
        while (j < neg.size() && neg[j] == t) ++j;
    }

    // Past the largest score everything is rejected: FRR = 1, FAR = 0. The
    // threshold coordinate of that point is the largest score itself.
    const double d_prev = prev_frr - prev_far;
    const double a = -d_prev / (1.0 - d_prev);
    return {prev_frr + a * (1.0 - prev_frr), prev_t};
}

// ---------------------------------------------------------------------------

std::string_view to_string(ScoreField field) {
    switch (field) {
        case ScoreField::Sv: return "s_sv";
        case ScoreField::Spf: return "s_spf";
        case ScoreField::Sasv: return "s_sasv";
    }
    return "?";
}

std::optional<ScoreField> parse_score_field(std::string_view token) {
    if (token == "s_sv") return ScoreField::Sv;
    if (token == "s_spf") return ScoreField::Spf;
    if (token == "s_sasv") return ScoreField::Sasv;
    return std::nullopt;
}

double field_value(const ScoreRecord& record, ScoreField field) {
    switch (field) {
        case ScoreField::Sv: return record.s_sv;
        case ScoreField::Spf: return record.s_spf;
        case ScoreField::Sasv: return record.s_sasv;
    }
    return 0.0;
}

EerReport sasv_report(std::span<const ScoreRecord> records, ScoreField field) {
    std::vector<double> target;
    std::vector<double> nontarget;
    std::vector<double> spoof;
    for (const auto& r : records) {
        const double s = field_value(r, field);
        switch (r.trial.label) {
            case TrialLabel::Target: target.push_back(s); break;
            case TrialLabel::NonTarget: nontarget.push_back(s); break;
            case TrialLabel::Spoof: spoof.push_back(s); break;
        }
    }
    if (target.empty()) throw DataError("EER report: no target trials");

    EerReport report;
    report.targets = target.size();
    report.nontargets = nontarget.size();
    report.spoofs = spoof.size();
    if (!nontarget.empty()) report.sv = eer(target, nontarget);
    if (!spoof.empty()) report.spf = eer(target, spoof);
    std::vector<double> negatives = nontarget;
    negatives.insert(negatives.end(), spoof.begin(), spoof.end());
    if (!negatives.empty()) report.sasv = eer(target, negatives);
    return report;
}

std::string format_report_table(const EerReport& report) {
    auto cell = [](const std::optional<EerResult>& r) {
        char buf[32];
        if (!r) return std::string("-");
        std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * r->eer);
        return std::string(buf);
    };
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-10s %10s %10s %10s\n", "", "SV-EER", "SPF-EER", "SASV-EER");
    out += buf;
    std::snprintf(buf, sizeof(buf), "%-10s %10s %10s %10s\n", "EER (%)", cell(report.sv).c_str(),
                  cell(report.spf).c_str(), cell(report.sasv).c_str());
    out += buf;
    std::snprintf(buf, sizeof(buf), "trials: %zu target, %zu nontarget, %zu spoof\n", report.targets,
                  report.nontargets, report.spoofs);
    out += buf;
    return out;
}

std::string format_report_csv(const EerReport& report) {
    std::string out = "metric,eer_percent,threshold\n";
    auto row = [&out](const char* name, const std::optional<EerResult>& r) {
        if (!r) return;
        out += name;
        out += ',';
        out += format_double17(100.0 * r->eer);
        out += ',';
        out += format_double17(r->threshold);
        out += '\n';
    };
    row("sv_eer", report.sv);
    row("spf_eer", report.spf);
    row("sasv_eer", report.sasv);
    return out;
}

// ---------------------------------------------------------------------------

std::string format_double17(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string format_scores_csv(std::span<const ScoreRecord> records) {
    std::string out = "enroll_id,test_id,label,s_sv,s_spf,s_sasv\n";
    for (const auto& r : records) {
        out += r.trial.enroll_id;
        out += ',';
        out += r.trial.test_id;
        out += ',';
        out += to_string(r.trial.label);
        for (double v : {r.s_sv, r.s_spf, r.s_sasv}) {
            out += ',';
            out += format_double17(v);
        }
        out += '\n';
    }
    return out;
}

void export_scores(std::span<const ScoreRecord> records, const std::filesystem::path& path) {
    write_file(path, format_scores_csv(records));
}

std::vector<ScoreRecord> parse_scores_csv(std::string_view text, std::string_view source) {
    std::vector<ScoreRecord> records;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        const std::string where = std::string(source) + ":" + std::to_string(line_no) + ": ";
        if (!header_seen) {
            if (line != "enroll_id,test_id,label,s_sv,s_spf,s_sasv") throw DataError(where + "unexpected score CSV header");
            header_seen = true;
            continue;
        }
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 6) throw DataError(where + "expected 6 fields");
        const auto label = parse_label(fields[2]);
        if (!label) throw DataError(where + "unknown label '" + std::string(fields[2]) + "'");
        ScoreRecord r;
        r.trial = Trial{std::string(fields[0]), std::string(fields[1]), *label};
        double* dst[3] = {&r.s_sv, &r.s_spf, &r.s_sasv};
        for (int k = 0; k < 3; ++k) {
            const auto v = parse_double(fields[3 + k]);
            if (!v) throw DataError(where + "bad score '" + std::string(fields[3 + k]) + "'");
            *dst[k] = *v;
        }
        records.push_back(std::move(r));
    }
    if (!header_seen) throw DataError(std::string(source) + ": empty score CSV");
    return records;
}

std::vector<ScoreRecord> load_scores_csv(const std::filesystem::path& path) {
    return parse_scores_csv(read_file(path), path.string());
}

}  // namespace sasv
