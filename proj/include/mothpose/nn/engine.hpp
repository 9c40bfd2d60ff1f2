#pragma once

#include <cstdint>
#include <vector>

#include "mothpose/nn/params.hpp"
#include "mothpose/nn/spec.hpp"
#include "mothpose/tensor.hpp"

namespace mothpose::nn {

/// Everything forward() computed, kept for the matching backward() call:
/// the input batch, each layer's output (last one = predictions), and the
/// max-pool argmax records.
struct Activations {
    Tensor4 input;
    std::vector<Tensor4> outputs;
    std::vector<std::vector<std::int64_t>> pool_argmax; // empty for non-pool layers

    const Tensor4& predictions() const { return outputs.back(); }
};

/// Parameter gradients (same shapes as Parameters) plus the gradient with
/// respect to every layer's input; inputs[0] is the gradient at the batch.
struct Gradients {
    Parameters params;
    std::vector<Tensor4> inputs;
};

struct LossValue {
    double value = 0.0;
    Tensor4 gradient; // d(loss)/d(pred), same shape as pred
};

/// Runs the batch through every layer. Throws ShapeError if the batch does
/// not match net.input.
Activations forward(const NetworkSpec& net, const Parameters& params, const Tensor4& batch);

/// Mean over samples of the squared Euclidean distance between prediction
/// and target vectors, plus its gradient (2/n)(pred - target).
LossValue squared_loss(const Tensor4& pred, const Tensor4& target);

/// Exact analytic gradients for every parameter and layer input. The
/// activations must come from a forward() call with the same net/params
/// (checked structurally; mismatch throws ConsistencyError).
Gradients backward(const NetworkSpec& net, const Parameters& params, const Activations& acts,
                   const Tensor4& loss_gradient);

/// Forward pass returning only the prediction vector(s), shape (n, out, 1, 1).
Tensor4 predict(const NetworkSpec& net, const Parameters& params, const Tensor4& batch);

} // namespace mothpose::nn
