#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mothpose/errors.hpp"

namespace mothpose::nn {

struct ConvSpec {
    int out_channels = 1;
    int kernel = 3;
    int stride = 1;
    int padding = 0;
};
struct ReluSpec {};
struct MaxPoolSpec {
    int window = 2;
    int stride = 2;
};
struct FullyConnectedSpec {
    int out_neurons = 1;
};
using LayerKind = std::variant<ConvSpec, ReluSpec, MaxPoolSpec, FullyConnectedSpec>;

/// Weight initialization schemes. PretrainedByName pulls the tensor from a
/// weight archive keyed by the layer name.
struct PretrainedByName {};
struct XavierInit {};
struct GaussianInit {
    double mean = 0.0;
    double stddev = 0.01;
};
struct ConstantInit {
    double value = 0.0;
};
using InitScheme = std::variant<PretrainedByName, XavierInit, GaussianInit, ConstantInit>;

struct LayerSpec {
    LayerKind kind;
    std::string name;
    double weight_lr_multiplier = 1.0; // 0 freezes the layer
    double bias_lr_multiplier = 1.0;
    InitScheme init = XavierInit{};
};

struct Shape3 {
    int c = 0, h = 0, w = 0;
    std::int64_t volume() const { return std::int64_t(c) * h * w; }
    bool operator==(const Shape3&) const = default;
};

struct NetworkSpec {
    Shape3 input;
    std::vector<LayerSpec> layers;
};

inline bool has_parameters(const LayerSpec& layer) {
    return std::holds_alternative<ConvSpec>(layer.kind) ||
           std::holds_alternative<FullyConnectedSpec>(layer.kind);
}

/// Output shape of one layer given its input shape. Throws ShapeError on a
/// kernel larger than the padded input and GeometryError when the stride
/// does not divide the span evenly.
Shape3 layer_output_shape(const LayerSpec& layer, const Shape3& in);

/// Per-layer output shapes, index-aligned with net.layers. Validates the
/// whole chain and that the final layer is fully connected.
std::vector<Shape3> infer_shapes(const NetworkSpec& net);

/// Weight element count of a layer (conv: out*in*k*k, fc: out*in). Zero for
/// parameter-free layers.
std::int64_t weight_count(const LayerSpec& layer, const Shape3& in);
std::int64_t bias_count(const LayerSpec& layer);

/// VGG 16 truncated after the max pooling that follows conv layer x
/// (x in {2,4,7,10,13}), with a fully connected regression head on top.
/// Every conv is 3x3 stride 1 pad 1 followed by ReLU; every pool is 2x2
/// stride 2. Conv layers are named conv1..conv13 and default to pretrained
/// init with multiplier 0; the head is named fc8 with constant-0 init and
/// multiplier 100 (the default finetuning-off configuration).
NetworkSpec build_vgg_x_fc(int x, int outputs);

} // namespace mothpose::nn
