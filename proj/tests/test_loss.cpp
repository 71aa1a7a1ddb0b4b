#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "sasv/loss.hpp"

using namespace sasv;

// Reference values computed to 40 digits with an arbitrary-precision calculator.
constexpr double kSoftplusMinus6 = 0.002475685137730449530859682043522968776727;  // log(1 + e^-6)
constexpr double kSoftplus10 = 10.0000453988992168646467694878293071056;          // log(1 + e^10)
constexpr double kLn2 = 0.6931471805599453094;

TEST_CASE("softplus reference values") {
    CHECK(softplus(0.0) == doctest::Approx(kLn2).epsilon(1e-16));
    CHECK(softplus(-6.0) == doctest::Approx(kSoftplusMinus6).epsilon(1e-15));
    CHECK(softplus(10.0) == doctest::Approx(kSoftplus10).epsilon(1e-15));
    CHECK(softplus(800.0) == 800.0);
    CHECK(softplus(-800.0) == 0.0);
    CHECK(std::isfinite(softplus(1e300)));
}

TEST_CASE("per-trial terms at the margins") {
    const OcsConfig cfg;
    // Target scoring exactly m0 and negative scoring exactly m1 sit at log 2.
    CHECK(ocs_trial_loss(cfg, 0.9, 0) == doctest::Approx(kLn2).epsilon(1e-15));
    CHECK(ocs_trial_loss(cfg, 0.2, 1) == doctest::Approx(kLn2).epsilon(1e-15));
    // beta (m0 - s) = 20 * 0.3 = 6 for a target scoring 0.6.
    CHECK(ocs_trial_loss(cfg, 0.6, 0) == doctest::Approx(6.0 + kSoftplusMinus6).epsilon(1e-14));
    // A negative scoring 0.5 costs softplus(6); one at 0.2 - 0.5 = -0.3 costs softplus(-10).
    CHECK(ocs_trial_loss(cfg, 0.5, 1) == doctest::Approx(6.0 + kSoftplusMinus6).epsilon(1e-14));
    CHECK(ocs_trial_loss(cfg, -0.3, 1) == doctest::Approx(kSoftplus10 - 10.0).epsilon(1e-12));
}

TEST_CASE("batch loss is the mean of per-trial terms and its gradient is exact") {
    const OcsConfig cfg{15.0, 0.7, -0.1};
    Rng rng(11);
    std::vector<double> s(9);
    std::vector<int> z(9);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = rng.uniform(-2, 2);
        z[i] = static_cast<int>(rng.below(2));
    }
    const auto res = ocs_loss(cfg, s, z);
    double mean = 0;
    for (std::size_t i = 0; i < s.size(); ++i) mean += ocs_trial_loss(cfg, s[i], z[i]);
    CHECK(res.loss == doctest::Approx(mean / 9).epsilon(1e-15));
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto f = [&] { return ocs_loss(cfg, s, z).loss; };
        CHECK(std::abs(res.grad[i] - oracle::central_difference(f, s[i])) < 1e-6);
    }
}

TEST_CASE("gradient signs and saturation") {
    const OcsConfig cfg;
    const std::vector<double> s{0.9, 0.2, -50.0, 50.0};
    const std::vector<int> z{0, 1, 0, 1};
    const auto res = ocs_loss(cfg, s, z);
    CHECK(res.grad[0] == doctest::Approx(-0.5 * 20 / 4));  // sigma(0) = 1/2
    CHECK(res.grad[1] == doctest::Approx(0.5 * 20 / 4));
    CHECK(res.grad[2] == doctest::Approx(-20.0 / 4));
    CHECK(res.grad[3] == doctest::Approx(20.0 / 4));
    for (double g : res.grad) CHECK(std::isfinite(g));
}

TEST_CASE("loss oracle at high precision") {
    Rng rng(12);
    for (int i = 0; i < 200; ++i) {
        const OcsConfig cfg{rng.uniform(1, 40), rng.uniform(0.3, 1.0), rng.uniform(-1.0, 0.2)};
        const double s = rng.uniform(-5, 5);
        const int z = static_cast<int>(rng.below(2));
        CHECK(std::abs(ocs_trial_loss(cfg, s, z) - oracle::ocs_term(s, z, cfg.beta, cfg.m0, cfg.m1)) < 1e-9);
    }
}

TEST_CASE("invalid inputs") {
    const OcsConfig cfg;
    const std::vector<double> none;
    const std::vector<int> no_class;
    CHECK_THROWS_AS(ocs_loss(cfg, none, no_class), std::invalid_argument);
    const std::vector<double> s{0.1, std::numeric_limits<double>::quiet_NaN()};
    const std::vector<int> z{0, 1};
    CHECK_THROWS_AS(ocs_loss(cfg, s, z), NumericError);
    const std::vector<double> ok{0.1};
    const std::vector<int> bad{2};
    CHECK_THROWS_AS(ocs_loss(cfg, ok, bad), std::invalid_argument);
    CHECK_THROWS_AS((OcsConfig{0.0, 0.9, 0.2}.validate()), ConfigError);
    CHECK_THROWS_AS((OcsConfig{20, 0.2, 0.9}.validate()), ConfigError);
    CHECK_NOTHROW(cfg.validate());
}
