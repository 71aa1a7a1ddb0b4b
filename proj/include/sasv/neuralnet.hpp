#pragma once

// Dense network kernel with hand-written backward passes.
//
// Batches are row-major matrices: one row per example. Every forward that
// needs to be differentiated writes what it needs into a cache, and the
// matching backward consumes that cache. Gradients are returned, never
// accumulated into the layers.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sasv/core.hpp"

namespace sasv::nn {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

// Named view over one parameter (or gradient) tensor.
struct ParamView {
    std::string name;
    std::span<double> values;
};

// ---------------------------------------------------------------------------

struct LinearLayer {
    Matrix weight;  // [out x in]
    std::vector<double> bias;

    std::size_t in_features() const { return weight.cols; }
    std::size_t out_features() const { return weight.rows; }

    LinearLayer() = default;
    LinearLayer(std::size_t in, std::size_t out) : weight(out, in), bias(out, 0.0) {}

    // Xavier-uniform weights, zero bias.
    static LinearLayer xavier(std::size_t in, std::size_t out, Rng& rng);
};

struct LinearGrads {
    Matrix weight;
    std::vector<double> bias;
};

// y = x W^T + b
Matrix linear_forward(const LinearLayer& layer, const Matrix& x);
// Returns dL/dx and fills `grads`.
Matrix linear_backward(const LinearLayer& layer, const Matrix& x, const Matrix& dy, LinearGrads& grads);

// ---------------------------------------------------------------------------

struct LeakyReluLayer {
    double negative_slope = 0.01;
};

Matrix leaky_relu_forward(const LeakyReluLayer& layer, const Matrix& x);
Matrix leaky_relu_backward(const LeakyReluLayer& layer, const Matrix& x, const Matrix& dy);

// ---------------------------------------------------------------------------

enum class NormMode { Train, Eval };

struct BatchNormLayer {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double epsilon = 1e-5;
    NormMode mode = NormMode::Train;

    BatchNormLayer() = default;
    explicit BatchNormLayer(std::size_t dim)
        : gamma(dim, 1.0), beta(dim, 0.0), running_mean(dim, 0.0), running_var(dim, 1.0) {}

    std::size_t dim() const { return gamma.size(); }
};

struct BatchNormCache {
    NormMode mode = NormMode::Train;
    Matrix x_hat;
    std::vector<double> inv_std;
};

struct BatchNormGrads {
    std::vector<double> gamma;
    std::vector<double> beta;
};

// Train mode normalizes with the batch mean and biased batch variance and
// moves the running statistics towards the batch (running variance uses the
// unbiased estimate). Eval mode uses the running statistics and mutates
// nothing. Train mode needs at least two rows.
Matrix batchnorm_forward(BatchNormLayer& layer, const Matrix& x, BatchNormCache* cache = nullptr);
// Normalizes with the running statistics whatever the layer mode.
Matrix batchnorm_forward(const BatchNormLayer& layer, const Matrix& x);
Matrix batchnorm_backward(const BatchNormLayer& layer, const BatchNormCache& cache, const Matrix& dy,
                          BatchNormGrads& grads);

// ---------------------------------------------------------------------------
// Cosine head: score_n = cos(w, e_n), clamped to [-1, 1].

struct CosineHeadCache {
    std::vector<double> row_norm;
    double w_norm = 0.0;
    std::vector<double> score;
};

std::vector<double> cosine_head_forward(std::span<const double> w, const Matrix& e,
                                        CosineHeadCache* cache = nullptr);
// Fills de (same shape as e) and dw (same size as w) from the score gradient.
void cosine_head_backward(std::span<const double> w, const Matrix& e, const CosineHeadCache& cache,
                          std::span<const double> dscore, Matrix& de, std::vector<double>& dw);

// ---------------------------------------------------------------------------
// Input batch norm -> (linear -> LeakyReLU) x k -> linear projection.

struct GradientTape {
    bool recorded = false;
    BatchNormCache bn;
    std::vector<Matrix> linear_inputs;    // input of each hidden linear, then of the projection
    std::vector<Matrix> pre_activations;  // output of each hidden linear
};

struct StackGradients {
    BatchNormGrads bn;
    std::vector<LinearGrads> hidden;
    LinearGrads projection;
    Matrix input;

    // Same order and names as DenseStack::parameters().
    std::vector<ParamView> parameters();
};

class DenseStack {
public:
    DenseStack() = default;
    DenseStack(std::size_t input_dim, const std::vector<std::size_t>& hidden_sizes, std::size_t output_dim,
               Rng& rng);

    BatchNormLayer bn;
    std::vector<LinearLayer> hidden;
    LeakyReluLayer activation;
    LinearLayer projection;

    std::size_t input_dim() const { return bn.dim(); }
    std::size_t output_dim() const { return projection.out_features(); }

    void set_mode(NormMode mode) { bn.mode = mode; }

    // Train mode updates batch-norm running statistics. Records into `tape`
    // when one is given.
    Matrix forward(const Matrix& x, GradientTape* tape = nullptr);
    // Eval-mode forward that leaves the stack untouched.
    Matrix forward_eval(const Matrix& x) const;

    // Throws std::logic_error if `tape` was not recorded by forward().
    StackGradients backward(const GradientTape& tape, const Matrix& dy) const;

    std::vector<ParamView> parameters();
};

}  // namespace sasv::nn
