#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mothpose/nn/spec.hpp"
#include "mothpose/tensor.hpp"

namespace mothpose::nn {

/// Learnable state of one layer. Conv weights are stored (out, in, k, k);
/// fully connected weights (out, in_volume, 1, 1). Bias length equals the
/// output channel / neuron count.
struct LayerParams {
    Tensor4 weights;
    std::vector<double> bias;
};

/// Per-layer parameters, index-aligned with NetworkSpec::layers. Slots for
/// parameter-free layers (ReLU, max pool) stay empty. Gradients reuse the
/// same container since they share every shape.
struct Parameters {
    std::vector<std::optional<LayerParams>> layers;
};

/// Name -> parameters map used by the weight archive and pretrained init.
using NamedParams = std::map<std::string, LayerParams>;

/// Allocates zeroed parameters matching the network (shapes from
/// infer_shapes). Useful as a gradient buffer or as the base for init.
Parameters zero_params(const NetworkSpec& net);

/// Flattens parameters into name -> params for archiving. Layer names of
/// learnable layers must be unique and nonempty.
NamedParams named_params(const NetworkSpec& net, const Parameters& params);

} // namespace mothpose::nn
