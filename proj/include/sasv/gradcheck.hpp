#pragma once

// Central finite-difference check of the integration model + one-class loss.

#include <cstdint>
#include <string>
#include <vector>

#include "sasv/integration_model.hpp"
#include "sasv/loss.hpp"

namespace sasv {

struct GradCheckOptions {
    InputMode mode = InputMode::Concat;
    std::size_t sv_dim = 8;
    std::size_t cm_dim = 6;
    std::size_t batch = 6;
    std::size_t samples_per_tensor = 16;  // 0 checks every coordinate
    double step = 1e-5;
    double tolerance = 1e-4;  // only used to count failing coordinates
    std::uint64_t seed = 0;
    OcsConfig loss;
};

struct TensorCheck {
    std::string name;
    std::size_t checked = 0;
    // Coordinates whose +-step moved some LeakyReLU input across zero. The
    // loss has a kink inside the difference interval there, so they are
    // counted but not compared.
    std::size_t kinks_skipped = 0;
    std::size_t failed = 0;  // compared coordinates with relative error >= tolerance
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

struct GradCheckReport {
    std::vector<TensorCheck> tensors;
    double max_rel_error = 0.0;
    double loss = 0.0;
};

// Relative error |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double analytic, double numeric);

// Builds a random model and batch from `seed`, then compares analytic
// parameter gradients of the train-mode loss against central differences.
// Coordinates are drawn with replacement when sampling.
GradCheckReport check_gradients(const GradCheckOptions& options);

}  // namespace sasv
