#include <doctest.h>

#include <cmath>
#include <limits>

#include "sasv/checkpoint.hpp"
#include "sasv/synthgen.hpp"
#include "sasv/training.hpp"

using namespace sasv;

namespace {

SynthData tiny_data(std::uint64_t seed = 3) {
    SynthConfig cfg;
    cfg.n_speakers = 6;
    cfg.utts_per_speaker = 6;
    cfg.spoofs_per_speaker = 6;
    cfg.sv_dim = 8;
    cfg.cm_dim = 4;
    cfg.seed = seed;
    return generate(cfg);
}

TrainConfig quick_config() {
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-3;
    cfg.seed = 5;
    return cfg;
}

TrainResult quick_train(const SynthData& data, const TrainConfig& cfg) {
    Rng rng(cfg.seed);
    auto model = IntegrationModel::create(InputMode::Concat, 8, 4, rng);
    return train(std::move(model), data.train, data.dev, data.stores, cfg, rng);
}

}  // namespace

TEST_CASE("adam matches a scalar reference") {
    const AdamConfig cfg{0.05, 0.8, 0.95, 1e-6};
    std::vector<double> p{0.5, -1.0};
    std::vector<double> g(2);
    AdamState state;
    double ref[2] = {0.5, -1.0}, m[2] = {0, 0}, v[2] = {0, 0};
    const double grads[4][2] = {{0.3, -2.0}, {-0.1, 0.0}, {1.5, 4.0}, {0.2, -0.2}};
    for (int step = 0; step < 4; ++step) {
        g = {grads[step][0], grads[step][1]};
        const std::vector<nn::ParamView> pv{{"p", p}}, gv{{"p", g}};
        adam_step(state, pv, gv, cfg);
        for (int k = 0; k < 2; ++k) {
            m[k] = 0.8 * m[k] + 0.2 * g[k];
            v[k] = 0.95 * v[k] + 0.05 * g[k] * g[k];
            const double mh = m[k] / (1 - std::pow(0.8, step + 1));
            const double vh = v[k] / (1 - std::pow(0.95, step + 1));
            ref[k] -= 0.05 * mh / (std::sqrt(vh) + 1e-6);
            CHECK(p[k] == doctest::Approx(ref[k]).epsilon(1e-14));
        }
    }
    CHECK(state.t == 4);
}

TEST_CASE("adam's first step moves each coordinate by about the learning rate") {
    const AdamConfig cfg{1e-3};
    std::vector<double> p{0.0, 0.0, 0.0};
    std::vector<double> g{1e-3, -50.0, 0.0};
    AdamState state;
    adam_step(state, std::vector<nn::ParamView>{{"p", p}}, std::vector<nn::ParamView>{{"p", g}}, cfg);
    CHECK(p[0] == doctest::Approx(-1e-3).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(1e-3).epsilon(1e-8));
    CHECK(p[2] == 0.0);
}

TEST_CASE("adam rejects non-finite gradients without touching parameters") {
    std::vector<double> a{1.0, 2.0}, b{3.0};
    std::vector<double> ga{0.1, 0.2}, gb{std::numeric_limits<double>::infinity()};
    AdamState state;
    const std::vector<nn::ParamView> pv{{"a", a}, {"b", b}}, gv{{"a", ga}, {"b", gb}};
    try {
        adam_step(state, pv, gv, AdamConfig{});
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        const std::string what = e.what();
        CHECK(what.find("'b'") != std::string::npos);
        CHECK(what.find("index 0") != std::string::npos);
    }
    CHECK(a == std::vector<double>{1.0, 2.0});
    CHECK(state.t == 0);
}

TEST_CASE("zero learning rate leaves parameters fixed") {
    std::vector<double> p{1.0, -2.0};
    std::vector<double> g{0.5, 0.5};
    AdamState state;
    for (int i = 0; i < 3; ++i)
        adam_step(state, std::vector<nn::ParamView>{{"p", p}}, std::vector<nn::ParamView>{{"p", g}}, AdamConfig{0.0});
    CHECK(p == std::vector<double>{1.0, -2.0});
}

TEST_CASE("train config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.batch_size = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.learning_rate = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.loss.m0 = 0.1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("training bookkeeping") {
    const auto data = tiny_data();
    auto cfg = quick_config();
    const auto result = quick_train(data, cfg);
    REQUIRE(result.history.size() == cfg.epochs);
    double best = result.history[0].dev_sasv_eer;
    std::size_t best_epoch = 1;
    for (const auto& e : result.history) {
        if (e.dev_sasv_eer < best) {
            best = e.dev_sasv_eer;
            best_epoch = e.epoch;
        }
    }
    CHECK(result.best.selection_metric == best);
    CHECK(result.best.epoch == best_epoch);
    CHECK(result.best.model.network.bn.mode == nn::NormMode::Eval);
    const auto csv = format_history_csv(result.history);
    CHECK(csv.rfind("epoch,train_loss,dev_sv_eer,dev_spf_eer,dev_sasv_eer\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(cfg.epochs + 1));
}

TEST_CASE("training loss goes down") {
    const auto data = tiny_data();
    auto cfg = quick_config();
    cfg.epochs = 15;
    const auto result = quick_train(data, cfg);
    CHECK(result.history.back().train_loss < 0.8 * result.history.front().train_loss);
}

TEST_CASE("training is deterministic") {
    const auto data = tiny_data();
    const auto a = quick_train(data, quick_config());
    const auto b = quick_train(data, quick_config());
    CHECK(encode_checkpoint(a.best) == encode_checkpoint(b.best));
    auto other = quick_config();
    other.seed = 6;
    CHECK(encode_checkpoint(quick_train(data, other).best) != encode_checkpoint(a.best));
}

TEST_CASE("a trailing single-trial batch is dropped, not an error") {
    const auto data = tiny_data();
    auto cfg = quick_config();
    cfg.batch_size = data.train.trials.size() - 1;
    cfg.epochs = 1;
    CHECK_NOTHROW(quick_train(data, cfg));
}

TEST_CASE("degenerate protocols are rejected") {
    const auto data = tiny_data();
    Protocol only_targets = data.train;
    std::erase_if(only_targets.trials, [](const Trial& t) { return t.label != TrialLabel::Target; });
    Rng rng(1);
    auto model = IntegrationModel::create(InputMode::Concat, 8, 4, rng);
    CHECK_THROWS_AS(train(model, only_targets, data.dev, data.stores, quick_config()), DataError);
    CHECK_THROWS_AS(train(model, data.train, Protocol{"empty", {}}, data.stores, quick_config()), DataError);
}

TEST_CASE("checkpoint round trip") {
    const auto data = tiny_data();
    auto result = quick_train(data, quick_config());
    result.best.length_normalized = true;
    const auto bytes = encode_checkpoint(result.best);
    const auto back = decode_checkpoint(bytes);
    CHECK(encode_checkpoint(back) == bytes);
    CHECK(back.length_normalized);
    CHECK(back.config.seed == 5);
    CHECK(score_protocol(back.model, data.eval, data.stores) == score_protocol(result.best.model, data.eval, data.stores));
}

TEST_CASE("checkpoint corruption is detected") {
    const auto data = tiny_data();
    const auto bytes = encode_checkpoint(quick_train(data, quick_config()).best);
    using Kind = CheckpointError::Kind;
    auto kind_of = [](const std::vector<std::uint8_t>& b) {
        try {
            decode_checkpoint(b);
        } catch (const CheckpointError& e) {
            return e.kind();
        }
        FAIL("corruption went unnoticed");
        return Kind::Malformed;
    };

    auto v = bytes;
    v[0] = 'X';
    CHECK(kind_of(v) == Kind::BadMagic);
    v = bytes;
    v[4] = 2;
    CHECK(kind_of(v) == Kind::Version);
    v = bytes;
    v[100] ^= 0x10;
    CHECK(kind_of(v) == Kind::Checksum);
    v = bytes;
    v.back() ^= 1;
    CHECK(kind_of(v) == Kind::Checksum);
    v.assign(bytes.begin(), bytes.begin() + 10);
    CHECK(kind_of(v) == Kind::Truncated);
    v.assign(bytes.begin(), bytes.end() - 1);
    CHECK(kind_of(v) == Kind::Truncated);

    // A valid container of another payload type.
    const auto other = wrap_payload(PayloadType::CascadeBaseline, std::vector<std::uint8_t>(8, 0));
    CHECK(kind_of(other) == Kind::WrongType);
}

TEST_CASE("crc32 reference value") {
    const std::string s = "123456789";
    CHECK(crc32(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())) == 0xCBF43926u);
}
