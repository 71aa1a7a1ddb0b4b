#include "sasv/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace sasv {

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

GradCheckReport check_gradients(const GradCheckOptions& options) {
    Rng rng(options.seed);
    IntegrationModel model = IntegrationModel::create(options.mode, options.sv_dim, options.cm_dim, rng);
    model.alpha = rng.uniform(0.5, 1.5);
    // Move batch norm off its identity initialization so gamma and beta matter.
    for (auto& g : model.network.bn.gamma) g = rng.uniform(0.5, 1.5);
    for (auto& b : model.network.bn.beta) b = rng.uniform(-0.5, 0.5);

    const std::size_t n = options.batch;
    nn::Matrix input(n, model.input_dim());
    for (double& v : input.data) v = rng.gaussian();
    std::vector<double> s_sv(n);
    std::vector<int> classes(n);
    for (std::size_t i = 0; i < n; ++i) {
        s_sv[i] = rng.uniform(-1.0, 1.0);
        classes[i] = static_cast<int>(i % 2);
    }

    auto signs = [](const ModelTape& tape) {
        std::vector<bool> out;
        for (const auto& z : tape.stack.pre_activations) {
            for (double v : z.data) out.push_back(v > 0.0);
        }
        return out;
    };

    // The batch-norm running statistics change on every train forward but do
    // not feed the train-mode output, so they need no restoring.
    ModelTape probe;
    auto loss_at = [&](IntegrationModel& m) {
        const auto fused = m.fused_forward(input, s_sv, probe);
        return ocs_loss(options.loss, fused, classes).loss;
    };

    model.set_norm_mode(nn::NormMode::Train);
    ModelTape tape;
    const auto fused = model.fused_forward(input, s_sv, tape);
    const auto loss = ocs_loss(options.loss, fused, classes);
    ModelGradients grads = model.backward(tape, loss.grad);
    const auto base_signs = signs(tape);

    GradCheckReport report;
    report.loss = loss.loss;
    auto params = model.parameters();
    auto grad_views = grads.parameters();
    for (std::size_t t = 0; t < params.size(); ++t) {
        TensorCheck check;
        check.name = params[t].name;
        const std::size_t size = params[t].values.size();
        std::vector<std::size_t> coords;
        if (options.samples_per_tensor == 0 || options.samples_per_tensor >= size) {
            for (std::size_t k = 0; k < size; ++k) coords.push_back(k);
        } else {
            for (std::size_t k = 0; k < options.samples_per_tensor; ++k) coords.push_back(rng.below(size));
        }
        for (std::size_t k : coords) {
            double& p = params[t].values[k];
            const double saved = p;
            p = saved + options.step;
            const double up = loss_at(model);
            bool kink = signs(probe) != base_signs;
            p = saved - options.step;
            const double down = loss_at(model);
            kink = kink || signs(probe) != base_signs;
            p = saved;
            if (kink) {
                ++check.kinks_skipped;
                continue;
            }
            const double numeric = (up - down) / (2.0 * options.step);
            const double err = relative_error(grad_views[t].values[k], numeric);
            if (err >= options.tolerance) ++check.failed;
            if (err > check.max_rel_error || check.checked == 0) {
                check.max_rel_error = err;
                check.worst_index = k;
                check.worst_analytic = grad_views[t].values[k];
                check.worst_numeric = numeric;
            }
            ++check.checked;
        }
        report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
        report.tensors.push_back(check);
    }
    return report;
}

}  // namespace sasv
