#include "sasv/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sasv::nn {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

LinearLayer LinearLayer::xavier(std::size_t in, std::size_t out, Rng& rng) {
    LinearLayer layer(in, out);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& v : layer.weight.data) v = rng.uniform(-limit, limit);
    return layer;
}

Matrix linear_forward(const LinearLayer& layer, const Matrix& x) {
    require(x.cols == layer.in_features(), "linear_forward: input width does not match layer");
    const std::size_t out = layer.out_features();
    Matrix y(x.rows, out);
    for (std::size_t n = 0; n < x.rows; ++n) {
        const auto xr = x.row(n);
        for (std::size_t o = 0; o < out; ++o) {
            const double* w = layer.weight.data.data() + o * x.cols;
            double s = 0.0;
            for (std::size_t k = 0; k < x.cols; ++k) s += xr[k] * w[k];
            y(n, o) = s + layer.bias[o];
        }
    }
    return y;
}

Matrix linear_backward(const LinearLayer& layer, const Matrix& x, const Matrix& dy, LinearGrads& grads) {
    require(x.cols == layer.in_features() && dy.cols == layer.out_features() && x.rows == dy.rows,
            "linear_backward: shape mismatch");
    const std::size_t in = layer.in_features();
    const std::size_t out = layer.out_features();
    grads.weight = Matrix(out, in);
    grads.bias.assign(out, 0.0);
    Matrix dx(x.rows, in);
    for (std::size_t n = 0; n < x.rows; ++n) {
        const auto xr = x.row(n);
        auto dxr = dx.row(n);
        for (std::size_t o = 0; o < out; ++o) {
            const double g = dy(n, o);
            if (g == 0.0) continue;
            grads.bias[o] += g;
            double* gw = grads.weight.data.data() + o * in;
            const double* w = layer.weight.data.data() + o * in;
            for (std::size_t k = 0; k < in; ++k) {
                gw[k] += g * xr[k];
                dxr[k] += g * w[k];
            }
        }
    }
    return dx;
}

Matrix leaky_relu_forward(const LeakyReluLayer& layer, const Matrix& x) {
    Matrix y = x;
    for (double& v : y.data) {
        if (v < 0.0) v *= layer.negative_slope;
    }
    return y;
}

Matrix leaky_relu_backward(const LeakyReluLayer& layer, const Matrix& x, const Matrix& dy) {
    require(x.rows == dy.rows && x.cols == dy.cols, "leaky_relu_backward: shape mismatch");
    Matrix dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
        if (x.data[i] < 0.0) dx.data[i] *= layer.negative_slope;
    }
    return dx;
}

// ---------------------------------------------------------------------------

Matrix batchnorm_forward(BatchNormLayer& layer, const Matrix& x, BatchNormCache* cache) {
    require(x.cols == layer.dim(), "batchnorm_forward: input width does not match layer");
    if (layer.mode == NormMode::Eval) {
        Matrix y = batchnorm_forward(static_cast<const BatchNormLayer&>(layer), x);
        if (cache) {
            cache->mode = NormMode::Eval;
            cache->inv_std.resize(layer.dim());
            cache->x_hat = Matrix(x.rows, x.cols);
            for (std::size_t j = 0; j < x.cols; ++j) {
                cache->inv_std[j] = 1.0 / std::sqrt(layer.running_var[j] + layer.epsilon);
            }
            for (std::size_t n = 0; n < x.rows; ++n) {
                for (std::size_t j = 0; j < x.cols; ++j) {
                    cache->x_hat(n, j) = (x(n, j) - layer.running_mean[j]) * cache->inv_std[j];
                }
            }
        }
        return y;
    }

    if (x.rows < 2) throw std::invalid_argument("batchnorm_forward: train mode needs a batch of at least 2");
    const std::size_t rows = x.rows;
    const std::size_t dim = x.cols;
    const double count = static_cast<double>(rows);

    std::vector<double> mean(dim, 0.0);
    std::vector<double> var(dim, 0.0);
    for (std::size_t n = 0; n < rows; ++n) {
        for (std::size_t j = 0; j < dim; ++j) mean[j] += x(n, j);
    }
    for (double& m : mean) m /= count;
    for (std::size_t n = 0; n < rows; ++n) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = x(n, j) - mean[j];
            var[j] += d * d;
        }
    }
    for (double& v : var) v /= count;

    Matrix x_hat(rows, dim);
    std::vector<double> inv_std(dim);
    for (std::size_t j = 0; j < dim; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + layer.epsilon);

    Matrix y(rows, dim);
    for (std::size_t n = 0; n < rows; ++n) {
        for (std::size_t j = 0; j < dim; ++j) {
            x_hat(n, j) = (x(n, j) - mean[j]) * inv_std[j];
            y(n, j) = layer.gamma[j] * x_hat(n, j) + layer.beta[j];
        }
    }

    const double m = layer.momentum;
    const double unbias = count / (count - 1.0);
    for (std::size_t j = 0; j < dim; ++j) {
        layer.running_mean[j] = (1.0 - m) * layer.running_mean[j] + m * mean[j];
        layer.running_var[j] = (1.0 - m) * layer.running_var[j] + m * var[j] * unbias;
    }

    if (cache) {
        cache->mode = NormMode::Train;
        cache->x_hat = std::move(x_hat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Matrix batchnorm_forward(const BatchNormLayer& layer, const Matrix& x) {
    require(x.cols == layer.dim(), "batchnorm_forward: input width does not match layer");
    Matrix y(x.rows, x.cols);
    for (std::size_t j = 0; j < x.cols; ++j) {
        const double inv_std = 1.0 / std::sqrt(layer.running_var[j] + layer.epsilon);
        for (std::size_t n = 0; n < x.rows; ++n) {
            y(n, j) = layer.gamma[j] * ((x(n, j) - layer.running_mean[j]) * inv_std) + layer.beta[j];
        }
    }
    return y;
}

Matrix batchnorm_backward(const BatchNormLayer& layer, const BatchNormCache& cache, const Matrix& dy,
                          BatchNormGrads& grads) {
    require(dy.rows == cache.x_hat.rows && dy.cols == cache.x_hat.cols && dy.cols == layer.dim(),
            "batchnorm_backward: shape mismatch");
    const std::size_t rows = dy.rows;
    const std::size_t dim = dy.cols;
    grads.gamma.assign(dim, 0.0);
    grads.beta.assign(dim, 0.0);
    for (std::size_t n = 0; n < rows; ++n) {
        for (std::size_t j = 0; j < dim; ++j) {
            grads.gamma[j] += dy(n, j) * cache.x_hat(n, j);
            grads.beta[j] += dy(n, j);
        }
    }

    Matrix dx(rows, dim);
    if (cache.mode == NormMode::Eval) {
        for (std::size_t n = 0; n < rows; ++n) {
            for (std::size_t j = 0; j < dim; ++j) dx(n, j) = dy(n, j) * layer.gamma[j] * cache.inv_std[j];
        }
        return dx;
    }

    // Gradient through the batch mean and variance:
    // dx = inv_std / N * (N dxh - sum(dxh) - x_hat * sum(dxh * x_hat)), dxh = dy * gamma
    const double count = static_cast<double>(rows);
    for (std::size_t j = 0; j < dim; ++j) {
        double sum_dxh = 0.0;
        double sum_dxh_xhat = 0.0;
        for (std::size_t n = 0; n < rows; ++n) {
            const double dxh = dy(n, j) * layer.gamma[j];
            sum_dxh += dxh;
            sum_dxh_xhat += dxh * cache.x_hat(n, j);
        }
        for (std::size_t n = 0; n < rows; ++n) {
            const double dxh = dy(n, j) * layer.gamma[j];
            dx(n, j) = cache.inv_std[j] / count * (count * dxh - sum_dxh - cache.x_hat(n, j) * sum_dxh_xhat);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------

std::vector<double> cosine_head_forward(std::span<const double> w, const Matrix& e, CosineHeadCache* cache) {
    require(w.size() == e.cols, "cosine_head_forward: direction size does not match embedding width");
    const double w_norm = norm(w);
    if (!(w_norm > 0.0) || !std::isfinite(w_norm)) throw NumericError("cosine head: direction vector has zero norm");
    std::vector<double> score(e.rows);
    std::vector<double> row_norm(e.rows);
    for (std::size_t n = 0; n < e.rows; ++n) {
        row_norm[n] = norm(e.row(n));
        if (!(row_norm[n] > 0.0) || !std::isfinite(row_norm[n])) {
            throw NumericError("cosine head: spoofing embedding " + std::to_string(n) + " has zero or non-finite norm");
        }
        score[n] = std::clamp(dot(w, e.row(n)) / (w_norm * row_norm[n]), -1.0, 1.0);
    }
    if (cache) {
        cache->row_norm = row_norm;
        cache->w_norm = w_norm;
        cache->score = score;
    }
    return score;
}

void cosine_head_backward(std::span<const double> w, const Matrix& e, const CosineHeadCache& cache,
                          std::span<const double> dscore, Matrix& de, std::vector<double>& dw) {
    require(dscore.size() == e.rows && cache.score.size() == e.rows, "cosine_head_backward: shape mismatch");
    const std::size_t dim = e.cols;
    de = Matrix(e.rows, dim);
    dw.assign(dim, 0.0);
    const double wn = cache.w_norm;
    for (std::size_t n = 0; n < e.rows; ++n) {
        const double g = dscore[n];
        const double en = cache.row_norm[n];
        const double s = cache.score[n];
        const auto er = e.row(n);
        auto der = de.row(n);
        const double inv_prod = 1.0 / (wn * en);
        const double e_coef = s / (en * en);
        const double w_coef = s / (wn * wn);
        for (std::size_t k = 0; k < dim; ++k) {
            der[k] = g * (w[k] * inv_prod - e_coef * er[k]);
            dw[k] += g * (er[k] * inv_prod - w_coef * w[k]);
        }
    }
}

// ---------------------------------------------------------------------------

DenseStack::DenseStack(std::size_t input_dim, const std::vector<std::size_t>& hidden_sizes, std::size_t output_dim,
                       Rng& rng)
    : bn(input_dim) {
    require(input_dim > 0 && output_dim > 0, "DenseStack: dimensions must be positive");
    std::size_t in = input_dim;
    for (std::size_t h : hidden_sizes) {
        require(h > 0, "DenseStack: hidden sizes must be positive");
        hidden.push_back(LinearLayer::xavier(in, h, rng));
        in = h;
    }
    projection = LinearLayer::xavier(in, output_dim, rng);
}

Matrix DenseStack::forward(const Matrix& x, GradientTape* tape) {
    Matrix h = batchnorm_forward(bn, x, tape ? &tape->bn : nullptr);
    if (tape) {
        tape->linear_inputs.clear();
        tape->pre_activations.clear();
    }
    for (const auto& layer : hidden) {
        Matrix pre = linear_forward(layer, h);
        Matrix post = leaky_relu_forward(activation, pre);
        if (tape) {
            tape->linear_inputs.push_back(std::move(h));
            tape->pre_activations.push_back(std::move(pre));
        }
        h = std::move(post);
    }
    Matrix out = linear_forward(projection, h);
    if (tape) {
        tape->linear_inputs.push_back(std::move(h));
        tape->recorded = true;
    }
    return out;
}

Matrix DenseStack::forward_eval(const Matrix& x) const {
    Matrix h = batchnorm_forward(bn, x);
    for (const auto& layer : hidden) h = leaky_relu_forward(activation, linear_forward(layer, h));
    return linear_forward(projection, h);
}

StackGradients DenseStack::backward(const GradientTape& tape, const Matrix& dy) const {
    if (!tape.recorded || tape.linear_inputs.size() != hidden.size() + 1) {
        throw std::logic_error("DenseStack::backward called without a matching forward pass");
    }
    StackGradients grads;
    grads.hidden.resize(hidden.size());
    Matrix g = linear_backward(projection, tape.linear_inputs.back(), dy, grads.projection);
    for (std::size_t i = hidden.size(); i-- > 0;) {
        g = leaky_relu_backward(activation, tape.pre_activations[i], g);
        g = linear_backward(hidden[i], tape.linear_inputs[i], g, grads.hidden[i]);
    }
    grads.input = batchnorm_backward(bn, tape.bn, g, grads.bn);
    return grads;
}

namespace {

template <typename Bn, typename Lin>
std::vector<ParamView> stack_views(Bn& bn, std::vector<Lin>& hidden, Lin& projection) {
    std::vector<ParamView> views;
    views.push_back({"bn.gamma", bn.gamma});
    views.push_back({"bn.beta", bn.beta});
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        const std::string prefix = "hidden" + std::to_string(i);
        views.push_back({prefix + ".weight", hidden[i].weight.data});
        views.push_back({prefix + ".bias", hidden[i].bias});
    }
    views.push_back({"projection.weight", projection.weight.data});
    views.push_back({"projection.bias", projection.bias});
    return views;
}

}  // namespace

std::vector<ParamView> DenseStack::parameters() {
    return stack_views(bn, hidden, projection);
}

std::vector<ParamView> StackGradients::parameters() {
    return stack_views(bn, hidden, projection);
}

}  // namespace sasv::nn
