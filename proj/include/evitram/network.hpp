#pragma once

#include <string>
#include <vector>

#include "evitram/rng.hpp"
#include "evitram/types.hpp"

namespace evitram {

enum class Activation { linear, relu, sigmoid, softmax };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct LayerSpec {
    int in_width = 0;
    int out_width = 0;
    Activation activation = Activation::linear;
};

// Weight matrix is in_width x out_width; a layer maps a row-batch x via
// activation(x * W + b).
struct LayerParams {
    Matrix W;
    Vector b;
};

using Params = std::vector<LayerParams>;
using Grads = std::vector<LayerParams>;  // shape-mirrors Params

// Fixed dense layer stack. Softmax is only accepted on the last layer
// (predictor heads and the evidence encoder's hidden layer end in softmax;
// nothing else does).
struct Network {
    std::vector<LayerSpec> layers;
    Params params;

    int input_width() const { return layers.front().in_width; }
    int output_width() const { return layers.back().out_width; }
};

// Builds a network with uniform Glorot weights, limit sqrt(6/(fan_in+fan_out)),
// and zero biases. Throws config_error on empty/ill-formed specs.
Network make_network(const std::vector<LayerSpec>& layers, Rng& rng);

LayerParams glorot_init(int in_width, int out_width, Rng& rng);

std::size_t param_count(const Network& net);

Grads zero_grads_like(const Params& params);

// Row-wise numerically stable softmax.
Matrix softmax_rows(const Matrix& logits);

struct ForwardCache {
    Matrix input;
    std::vector<Matrix> pre;   // pre-activations per layer
    std::vector<Matrix> post;  // activations per layer
};

// Runs the stack on a row-batch. Throws a dimension error naming the
// offending layer on width mismatch. When cache is non-null the
// per-layer pre- and post-activations are recorded for backward().
Matrix forward(const Network& net, const Matrix& x, ForwardCache* cache = nullptr);

struct BackwardResult {
    Grads grads;
    Matrix input_grad;  // dLoss/dInput, same shape as cache.input
};

// Backpropagates loss_grad (dLoss/dOutput) through the cached forward pass.
// The cache must come from a forward() over the same network and batch;
// a mismatch raises an internal-consistency error.
BackwardResult backward(const Network& net, const ForwardCache& cache, const Matrix& loss_grad);

}  // namespace evitram
