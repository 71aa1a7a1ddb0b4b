#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sasv/baselines.hpp"
#include "sasv/checkpoint.hpp"
#include "sasv/core.hpp"
#include "sasv/gradcheck.hpp"
#include "sasv/integration_model.hpp"
#include "sasv/metrics.hpp"
#include "sasv/synthgen.hpp"
#include "sasv/training.hpp"

namespace sasv::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kModes{"concat", "cm_only", "concat_plus_enroll"};
const std::vector<std::string> kFields{"s_sv", "s_spf", "s_sasv"};
const std::map<std::string, bool> kOnOff{{"on", true}, {"off", false}};

std::shared_ptr<spdlog::logger> make_logger() {
    auto logger = spdlog::stderr_color_mt("sasv");
    logger->set_pattern("[%l] %v");
    logger->set_level(spdlog::level::info);
    if (const char* env = std::getenv("SASV_LOG")) {
        const std::string level(env);
        if (level == "error") logger->set_level(spdlog::level::err);
        else if (level == "warn") logger->set_level(spdlog::level::warn);
        else if (level == "info") logger->set_level(spdlog::level::info);
        else if (level == "debug") logger->set_level(spdlog::level::debug);
    }
    return logger;
}

spdlog::logger& log() {
    static auto logger = spdlog::get("sasv") ? spdlog::get("sasv") : make_logger();
    return *logger;
}

void prepare_out(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create output directory '" + out.string() + "': " + ec.message());
}

void write_sidecar(const CLI::App& cmd, const fs::path& out) {
    write_file(out / (cmd.get_name() + "_config.toml"), cmd.config_to_str(true, false));
}

EmbeddingStores load_stores(const fs::path& sv_path, const fs::path& cm_path, bool normalize) {
    EmbeddingStores stores{load_embeddings(sv_path, StoreKind::Sv), load_embeddings(cm_path, StoreKind::Cm)};
    if (normalize) {
        stores.sv = stores.sv.normalized();
        stores.cm = stores.cm.normalized();
    }
    log().debug("loaded {} SV and {} CM embeddings", stores.sv.size(), stores.cm.size());
    return stores;
}

void print_report(const std::string& title, const EerReport& report) {
    std::cout << title << '\n' << format_report_table(report);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    SynthConfig cfg;
    fs::path out;
};

int run_synth(const SynthArgs& a, const CLI::App& cmd) {
    prepare_out(a.out);
    const SynthData data = generate(a.cfg);
    save_embeddings(data.stores.sv, a.out / "sv_emb.tsv");
    save_embeddings(data.stores.cm, a.out / "cm_emb.tsv");
    save_protocol(data.train, a.out / "train.tsv");
    save_protocol(data.dev, a.out / "dev.tsv");
    save_protocol(data.eval, a.out / "eval.tsv");
    const auto cm = raw_cm_scores(data);
    write_file(a.out / "cm_scores.tsv", format_cm_scores(cm));
    const std::string summary = format_summary(describe(a.cfg, data));
    write_file(a.out / "summary.txt", summary);
    write_sidecar(cmd, a.out);
    std::cout << summary;
    return kOk;
}

struct TrainArgs {
    fs::path sv_emb, cm_emb, train_protocol, dev_protocol, out;
    std::string mode = "concat";
    bool normalize = false;
    TrainConfig cfg;
    bool no_shuffle = false;
};

int run_train(TrainArgs a, const CLI::App& cmd) {
    a.cfg.shuffle = !a.no_shuffle;
    a.cfg.validate();
    prepare_out(a.out);
    const EmbeddingStores stores = load_stores(a.sv_emb, a.cm_emb, a.normalize);
    const Protocol train_p = load_protocol(a.train_protocol);
    const Protocol dev_p = load_protocol(a.dev_protocol);

    Rng rng(a.cfg.seed);
    IntegrationModel model = IntegrationModel::create(*parse_input_mode(a.mode), stores.sv.dimension(), stores.cm.dimension(), rng);
    TrainResult result = train(std::move(model), train_p, dev_p, stores, a.cfg, rng, [](const EpochStats& e) {
        log().info("epoch {:3d}  loss {:.6f}  dev SASV-EER {:.2f}%", e.epoch, e.train_loss, 100.0 * e.dev_sasv_eer);
    });
    result.best.length_normalized = a.normalize;

    save_checkpoint(result.best, a.out / "model.ckpt");
    write_file(a.out / "history.csv", format_history_csv(result.history));
    const auto dev_records = score_protocol(result.best.model, dev_p, stores, a.cfg.threads);
    export_scores(dev_records, a.out / "dev_scores.csv");
    const EerReport report = sasv_report(dev_records, ScoreField::Sasv);
    write_file(a.out / "dev_report.csv", format_report_csv(report));
    write_sidecar(cmd, a.out);
    print_report("development (best epoch " + std::to_string(result.best.epoch) + ")", report);
    return kOk;
}

struct EvalArgs {
    fs::path model, sv_emb, cm_emb, protocol, out;
    std::string field = "s_sasv";
    unsigned threads = 1;
};

std::vector<ScoreRecord> score_with_checkpoint(const EvalArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.model);
    const EmbeddingStores stores = load_stores(a.sv_emb, a.cm_emb, ckpt.length_normalized);
    const Protocol protocol = load_protocol(a.protocol);
    return score_protocol(ckpt.model, protocol, stores, a.threads);
}

int run_eval(const EvalArgs& a, const CLI::App& cmd) {
    prepare_out(a.out);
    const auto records = score_with_checkpoint(a);
    export_scores(records, a.out / "scores.csv");
    const EerReport report = sasv_report(records, *parse_score_field(a.field));
    write_file(a.out / "report.csv", format_report_csv(report));
    write_file(a.out / "report.txt", format_report_table(report));
    write_sidecar(cmd, a.out);
    print_report("scores: " + a.field, report);
    return kOk;
}

int run_score(const EvalArgs& a, const CLI::App& cmd) {
    prepare_out(a.out);
    const auto records = score_with_checkpoint(a);
    export_scores(records, a.out / "scores.csv");
    write_sidecar(cmd, a.out);
    log().info("wrote {} scores", records.size());
    return kOk;
}

struct ReportArgs {
    fs::path scores, out;
    std::string field = "s_sasv";
};

int run_report(const ReportArgs& a, const CLI::App& cmd) {
    prepare_out(a.out);
    const auto records = load_scores_csv(a.scores);
    const EerReport report = sasv_report(records, *parse_score_field(a.field));
    write_file(a.out / "report.csv", format_report_csv(report));
    write_file(a.out / "report.txt", format_report_table(report));
    write_sidecar(cmd, a.out);
    print_report("scores: " + a.field, report);
    return kOk;
}

struct BaselineArgs {
    std::string kind = "sum";
    fs::path sv_emb, cm_emb, cm_scores, cm_model, dev_protocol, eval_protocol, out;
    bool normalize = false;
};

int run_baseline(const BaselineArgs& a, const CLI::App& cmd) {
    if (a.cm_scores.empty() == a.cm_model.empty()) throw ConfigError("baseline: give exactly one of --cm-scores or --cm-model");
    if (a.kind != "sum" && a.dev_protocol.empty()) throw ConfigError("baseline: --kind " + a.kind + " needs --dev-protocol");
    prepare_out(a.out);

    std::optional<CmScoreSource> source;
    EmbeddingStore sv = load_embeddings(a.sv_emb, StoreKind::Sv);
    EmbeddingStore cm(StoreKind::Cm, 1);
    if (!a.cm_model.empty()) {
        if (a.cm_emb.empty()) throw ConfigError("baseline: --cm-model needs --cm-emb");
        Checkpoint ckpt = load_checkpoint(a.cm_model);
        if (ckpt.model.mode != InputMode::CmOnly) throw DataError("baseline: --cm-model must be a cm_only checkpoint");
        cm = load_embeddings(a.cm_emb, StoreKind::Cm);
        if (ckpt.length_normalized) cm = cm.normalized();
        source.emplace(std::move(ckpt.model));
    } else {
        source.emplace(load_cm_scores(a.cm_scores));
    }
    if (a.normalize) sv = sv.normalized();
    const EmbeddingStores stores{std::move(sv), std::move(cm)};

    const Protocol eval_p = load_protocol(a.eval_protocol);
    const auto eval_in = baseline_inputs(eval_p, stores, *source);
    std::vector<ScoreRecord> eval_records;
    std::vector<ScoreRecord> dev_records;
    if (a.kind == "sum") {
        eval_records = sum_fusion_scores(eval_in);
    } else {
        const Protocol dev_p = load_protocol(a.dev_protocol);
        const auto dev_in = baseline_inputs(dev_p, stores, *source);
        if (a.kind == "cascade") {
            const double threshold = cascade_fit(dev_in);
            write_bytes(a.out / "baseline.ckpt", encode_cascade(threshold));
            log().info("cascade threshold {}", format_double17(threshold));
            dev_records = cascade_scores(dev_in, threshold);
            eval_records = cascade_scores(eval_in, threshold);
        } else if (a.kind == "logreg") {
            const LogregFit fit = logreg_fit(dev_in);
            write_bytes(a.out / "baseline.ckpt", encode_logistic(fit.model));
            log().info("logistic weights sv={} cm={} bias={} (loss {} -> {})", fit.model.w_sv, fit.model.w_cm,
                       fit.model.bias, fit.initial_loss, fit.final_loss);
            dev_records = logreg_scores(fit.model, dev_in);
            eval_records = logreg_scores(fit.model, eval_in);
        }
    }
    if (!dev_records.empty()) {
        export_scores(dev_records, a.out / "dev_scores.csv");
        const EerReport dev_report = sasv_report(dev_records, ScoreField::Sasv);
        write_file(a.out / "dev_report.csv", format_report_csv(dev_report));
        print_report(a.kind + " baseline, development", dev_report);
    }
    export_scores(eval_records, a.out / "eval_scores.csv");
    const EerReport report = sasv_report(eval_records, ScoreField::Sasv);
    write_file(a.out / "eval_report.csv", format_report_csv(report));
    write_sidecar(cmd, a.out);
    print_report(a.kind + " baseline, evaluation", report);
    return kOk;
}

struct GradcheckArgs {
    GradCheckOptions options;
    std::string mode = "concat";
    std::size_t seeds = 10;
    double tolerance = 1e-4;
    fs::path out;
};

int run_gradcheck(const GradcheckArgs& a, const CLI::App& cmd) {
    double worst = 0.0;
    std::string report = "seed,tensor,checked,kinks_skipped,failed,max_rel_error,worst_index,analytic,numeric\n";
    for (std::size_t s = 0; s < a.seeds; ++s) {
        GradCheckOptions options = a.options;
        options.tolerance = a.tolerance;
        options.seed = a.options.seed + s;
        options.mode = *parse_input_mode(a.mode);
        const auto result = check_gradients(options);
        for (const auto& t : result.tensors) {
            report += std::to_string(options.seed) + "," + t.name + "," + std::to_string(t.checked) + "," +
                      std::to_string(t.kinks_skipped) + "," + std::to_string(t.failed) + "," +
                      format_double17(t.max_rel_error) + "," + std::to_string(t.worst_index) + "," +
                      format_double17(t.worst_analytic) + "," + format_double17(t.worst_numeric) + "\n";
        }
        worst = std::max(worst, result.max_rel_error);
        log().debug("seed {}: max relative error {:.3e}", options.seed, result.max_rel_error);
    }
    if (!a.out.empty()) {
        prepare_out(a.out);
        write_file(a.out / "gradcheck.csv", report);
        write_sidecar(cmd, a.out);
    }
    std::printf("max relative error %.3e over %zu seeds (tolerance %.1e): %s\n", worst, a.seeds, a.tolerance,
                worst < a.tolerance ? "PASS" : "FAIL");
    return worst < a.tolerance ? kOk : kNumericError;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Spoofing-aware speaker verification: integration network, baselines and EER evaluation", "sasv"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "sasv 1.0");

    const std::string eer_note =
        "EER convention: a target is rejected when its score < threshold, a negative is accepted when its score >= "
        "threshold; FAR and FRR are linearly interpolated at their crossing.";

    // synth
    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic embedding/protocol set");
    synth_cmd->add_option("--seed", synth.cfg.seed, "RNG seed")->capture_default_str();
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();
    synth_cmd->add_option("--speakers", synth.cfg.n_speakers)->capture_default_str();
    synth_cmd->add_option("--utts", synth.cfg.utts_per_speaker, "Bonafide utterances per speaker")->capture_default_str();
    synth_cmd->add_option("--spoofs", synth.cfg.spoofs_per_speaker, "Spoofed utterances per speaker")->capture_default_str();
    synth_cmd->add_option("--sv-dim", synth.cfg.sv_dim)->capture_default_str();
    synth_cmd->add_option("--cm-dim", synth.cfg.cm_dim)->capture_default_str();
    synth_cmd->add_option("--sv-noise", synth.cfg.sv_noise)->capture_default_str();
    synth_cmd->add_option("--spoof-sv-offset", synth.cfg.spoof_sv_offset)->capture_default_str();
    synth_cmd->add_option("--cm-separation", synth.cfg.cm_separation)->capture_default_str();
    synth_cmd->add_option("--cm-noise", synth.cfg.cm_noise)->capture_default_str();

    // train
    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train the integration network");
    train_cmd->footer(
        "Mini-batches are drawn from a seeded per-epoch shuffle; a final batch of a single trial is dropped because "
        "train-mode batch norm needs two. The checkpoint kept is the epoch with the lowest dev SASV-EER.\n" +
        eer_note);
    train_cmd->add_option("--sv-emb", tr.sv_emb, "SV embedding file")->required();
    train_cmd->add_option("--cm-emb", tr.cm_emb, "CM embedding file")->required();
    train_cmd->add_option("--train-protocol", tr.train_protocol)->required();
    train_cmd->add_option("--dev-protocol", tr.dev_protocol)->required();
    train_cmd->add_option("--mode", tr.mode)->check(CLI::IsMember(kModes))->capture_default_str();
    train_cmd->add_option("--normalize-embeddings", tr.normalize)->transform(CLI::CheckedTransformer(kOnOff))->default_str("off");
    train_cmd->add_option("--seed", tr.cfg.seed)->capture_default_str();
    train_cmd->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
    train_cmd->add_option("--batch", tr.cfg.batch_size)->capture_default_str();
    train_cmd->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
    train_cmd->add_option("--beta", tr.cfg.loss.beta, "Loss scale")->capture_default_str();
    train_cmd->add_option("--m0", tr.cfg.loss.m0, "Target margin")->capture_default_str();
    train_cmd->add_option("--m1", tr.cfg.loss.m1, "Non-target/spoof margin")->capture_default_str();
    train_cmd->add_flag("--no-shuffle", tr.no_shuffle, "Keep protocol order in every epoch");
    train_cmd->add_option("--threads", tr.cfg.threads, "Dev scoring workers")->capture_default_str();
    train_cmd->add_option("--out", tr.out)->required();

    // eval / score
    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Score a protocol with a checkpoint and report EERs");
    eval_cmd->footer(eer_note);
    EvalArgs sc;
    auto* score_cmd = app.add_subcommand("score", "Score a protocol with a checkpoint");
    for (auto [cmd, a] : {std::pair{eval_cmd, &ev}, std::pair{score_cmd, &sc}}) {
        cmd->add_option("--model", a->model, "Checkpoint")->required();
        cmd->add_option("--sv-emb", a->sv_emb)->required();
        cmd->add_option("--cm-emb", a->cm_emb)->required();
        cmd->add_option("--protocol,--eval-protocol", a->protocol)->required();
        cmd->add_option("--threads", a->threads)->capture_default_str();
        cmd->add_option("--out", a->out)->required();
    }
    eval_cmd->add_option("--score-field", ev.field)->check(CLI::IsMember(kFields))->capture_default_str();

    // report
    ReportArgs rep;
    auto* report_cmd = app.add_subcommand("report", "Compute EERs from a score CSV");
    report_cmd->footer(eer_note);
    report_cmd->add_option("--scores", rep.scores, "Score CSV")->required();
    report_cmd->add_option("--score-field", rep.field)->check(CLI::IsMember(kFields))->capture_default_str();
    report_cmd->add_option("--out", rep.out)->required();

    // baseline
    BaselineArgs bl;
    auto* baseline_cmd = app.add_subcommand("baseline", "Score-level fusion baselines");
    baseline_cmd->footer(eer_note);
    baseline_cmd->add_option("--kind", bl.kind)->check(CLI::IsMember({"sum", "cascade", "logreg"}))->capture_default_str();
    baseline_cmd->add_option("--sv-emb", bl.sv_emb)->required();
    baseline_cmd->add_option("--cm-emb", bl.cm_emb, "CM embeddings (with --cm-model)");
    baseline_cmd->add_option("--cm-scores", bl.cm_scores, "Per-utterance CM scores, ID<TAB>score");
    baseline_cmd->add_option("--cm-model", bl.cm_model, "cm_only checkpoint used as CM scorer");
    baseline_cmd->add_option("--dev-protocol", bl.dev_protocol, "Fitting set (cascade, logreg)");
    baseline_cmd->add_option("--eval-protocol", bl.eval_protocol)->required();
    baseline_cmd->add_option("--normalize-embeddings", bl.normalize)->transform(CLI::CheckedTransformer(kOnOff))->default_str("off");
    baseline_cmd->add_option("--out", bl.out)->required();

    // gradcheck
    GradcheckArgs gc;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the model gradients");
    grad_cmd->add_option("--seed", gc.options.seed, "First seed")->capture_default_str();
    grad_cmd->add_option("--seeds", gc.seeds, "Number of seeds")->capture_default_str();
    grad_cmd->add_option("--mode", gc.mode)->check(CLI::IsMember(kModes))->capture_default_str();
    grad_cmd->add_option("--sv-dim", gc.options.sv_dim)->capture_default_str();
    grad_cmd->add_option("--cm-dim", gc.options.cm_dim)->capture_default_str();
    grad_cmd->add_option("--batch", gc.options.batch)->capture_default_str();
    grad_cmd->add_option("--samples", gc.options.samples_per_tensor, "Coordinates per tensor (0 = all)")->capture_default_str();
    grad_cmd->add_option("--tolerance", gc.tolerance)->capture_default_str();
    grad_cmd->add_option("--out", gc.out);

    std::vector<const char*> argv;
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (*synth_cmd) return run_synth(synth, *synth_cmd);
        if (*train_cmd) return run_train(tr, *train_cmd);
        if (*eval_cmd) return run_eval(ev, *eval_cmd);
        if (*score_cmd) return run_score(sc, *score_cmd);
        if (*report_cmd) return run_report(rep, *report_cmd);
        if (*baseline_cmd) return run_baseline(bl, *baseline_cmd);
        if (*grad_cmd) return run_gradcheck(gc, *grad_cmd);
    } catch (const ConfigError& e) {
        log().error("{}", e.what());
        return kUsageError;
    } catch (const NumericError& e) {
        log().error("numeric failure: {}", e.what());
        return kNumericError;
    } catch (const std::exception& e) {
        log().error("{}", e.what());
        return kDataError;
    }
    return kUsageError;
}

}  // namespace sasv::cli
