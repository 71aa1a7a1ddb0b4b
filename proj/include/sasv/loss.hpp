#pragma once

// One-class softmax objective over fused trial scores.

#include <span>
#include <vector>

namespace sasv {

struct OcsConfig {
    double beta = 20.0;  // scale
    double m0 = 0.9;     // target margin
    double m1 = 0.2;     // non-target / spoof margin

    // Throws ConfigError unless beta > 0 and m0 > m1.
    void validate() const;
};

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d score, one per trial
};

// log(1 + e^x) without overflow or cancellation.
double softplus(double x);

// Per-trial term: softplus(beta * (m_z - s) * (-1)^z).
double ocs_trial_loss(const OcsConfig& cfg, double score, int z);

// Mean per-trial loss over the batch and its exact gradient. `classes`
// holds 0 for target trials and 1 otherwise.
LossResult ocs_loss(const OcsConfig& cfg, std::span<const double> scores, std::span<const int> classes);

}  // namespace sasv
