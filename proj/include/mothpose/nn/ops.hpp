#pragma once

#include <cstdint>
#include <vector>

#include "mothpose/nn/spec.hpp"
#include "mothpose/tensor.hpp"

namespace mothpose::nn {

// Layer kernels. Forward passes parallelize across batch samples; every
// gradient accumulation runs in a fixed order so results are bit-identical
// regardless of thread count.

/// Cross-correlation with per-output-channel bias. weights (oc, ic, k, k),
/// bias length oc, input (n, ic, h, w) -> (n, oc, oh, ow).
Tensor4 conv_forward(const ConvSpec& spec, const Tensor4& weights,
                     const std::vector<double>& bias, const Tensor4& input);

/// Gradient w.r.t. the conv input, shape (n, in.c, in.h, in.w).
Tensor4 conv_backward_data(const ConvSpec& spec, const Tensor4& weights,
                           const Tensor4& grad_out, const Shape3& in_shape);

/// Accumulates conv weight/bias gradients over the batch into grad_weights
/// / grad_bias (which must be pre-shaped and zeroed by the caller).
void conv_backward_params(const ConvSpec& spec, const Tensor4& input, const Tensor4& grad_out,
                          Tensor4& grad_weights, std::vector<double>& grad_bias);

Tensor4 relu_forward(const Tensor4& input);

/// Gates grad_out by the sign of the forward *input*: positions with
/// input <= 0 pass zero gradient.
Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_out);

/// Max pooling; records per output element the flat (c,h,w) offset of its
/// window maximum within the sample. Ties go to the first element in
/// row-major window order.
Tensor4 maxpool_forward(const MaxPoolSpec& spec, const Tensor4& input,
                        std::vector<std::int64_t>& argmax);

/// Routes each output gradient to the recorded argmax position.
Tensor4 maxpool_backward(const MaxPoolSpec& spec, const std::vector<std::int64_t>& argmax,
                         const Tensor4& grad_out, const Shape3& in_shape);

/// Flattens each sample and applies weights (out, v, 1, 1) + bias;
/// output (n, out, 1, 1).
Tensor4 fc_forward(const Tensor4& weights, const std::vector<double>& bias, const Tensor4& input);

Tensor4 fc_backward_data(const Tensor4& weights, const Tensor4& grad_out, const Shape3& in_shape,
                         std::int64_t n);

void fc_backward_params(const Tensor4& input, const Tensor4& grad_out, Tensor4& grad_weights,
                        std::vector<double>& grad_bias);

} // namespace mothpose::nn
