#include "sasv/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sasv/core.hpp"

namespace sasv {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Exponent argument for one trial and its derivative with respect to the score.
double ocs_argument(const OcsConfig& cfg, double score, int z, double& d_arg) {
    if (z == 0) {
        d_arg = -cfg.beta;
        return cfg.beta * (cfg.m0 - score);
    }
    d_arg = cfg.beta;
    return cfg.beta * (score - cfg.m1);
}

}  // namespace

void OcsConfig::validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("loss: beta must be positive and finite");
    if (!std::isfinite(m0) || !std::isfinite(m1)) throw ConfigError("loss: margins must be finite");
    if (!(m0 > m1)) throw ConfigError("loss: target margin m0 must exceed m1");
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double ocs_trial_loss(const OcsConfig& cfg, double score, int z) {
    double unused = 0.0;
    return softplus(ocs_argument(cfg, score, z, unused));
}

LossResult ocs_loss(const OcsConfig& cfg, std::span<const double> scores, std::span<const int> classes) {
    if (scores.empty()) throw std::invalid_argument("ocs_loss: empty batch");
    if (scores.size() != classes.size()) throw std::invalid_argument("ocs_loss: scores and classes differ in size");
    const double inv_n = 1.0 / static_cast<double>(scores.size());
    LossResult out;
    out.grad.resize(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw NumericError("ocs_loss: non-finite score at batch index " + std::to_string(i));
        if (classes[i] != 0 && classes[i] != 1) throw std::invalid_argument("ocs_loss: class must be 0 or 1");
        double d_arg = 0.0;
        const double arg = ocs_argument(cfg, scores[i], classes[i], d_arg);
        total += softplus(arg);
        out.grad[i] = inv_n * sigmoid(arg) * d_arg;
    }
    out.loss = total / static_cast<double>(scores.size());
    return out;
}

}  // namespace sasv
