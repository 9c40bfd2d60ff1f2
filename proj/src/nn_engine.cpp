#include "mothpose/nn/engine.hpp"

#include "mothpose/nn/ops.hpp"

namespace mothpose::nn {

namespace {

Shape3 shape_of(const Tensor4& t) {
    return {static_cast<int>(t.c()), static_cast<int>(t.h()), static_cast<int>(t.w())};
}

const LayerParams& learnable(const Parameters& params, std::size_t i, const LayerSpec& layer) {
    if (i >= params.layers.size() || !params.layers[i].has_value())
        throw ConsistencyError("no parameters stored for layer " + layer.name);
    return *params.layers[i];
}

} // namespace

Parameters zero_params(const NetworkSpec& net) {
    const auto shapes = infer_shapes(net);
    Parameters out;
    out.layers.resize(net.layers.size());
    Shape3 in = net.input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& layer = net.layers[i];
        if (has_parameters(layer)) {
            LayerParams lp;
            if (const auto* conv = std::get_if<ConvSpec>(&layer.kind))
                lp.weights = Tensor4(conv->out_channels, in.c, conv->kernel, conv->kernel, 0.0);
            else
                lp.weights = Tensor4(std::get<FullyConnectedSpec>(layer.kind).out_neurons,
                                     in.volume(), 1, 1, 0.0);
            lp.bias.assign(static_cast<std::size_t>(bias_count(layer)), 0.0);
            out.layers[i] = std::move(lp);
        }
        in = shapes[i];
    }
    return out;
}

NamedParams named_params(const NetworkSpec& net, const Parameters& params) {
    if (params.layers.size() != net.layers.size())
        throw ConsistencyError("parameters do not align with the network");
    NamedParams named;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!has_parameters(net.layers[i])) continue;
        const LayerSpec& layer = net.layers[i];
        if (layer.name.empty()) throw ConsistencyError("learnable layer without a name");
        if (!named.emplace(layer.name, learnable(params, i, layer)).second)
            throw ConsistencyError("duplicate layer name: " + layer.name);
    }
    return named;
}

Activations forward(const NetworkSpec& net, const Parameters& params, const Tensor4& batch) {
    if (shape_of(batch) != net.input) throw ShapeError("batch does not match network input shape");
    if (params.layers.size() != net.layers.size())
        throw ConsistencyError("parameters do not align with the network");

    Activations acts;
    acts.input = batch;
    acts.outputs.reserve(net.layers.size());
    acts.pool_argmax.resize(net.layers.size());

    const Tensor4* cur = &batch;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& layer = net.layers[i];
        if (const auto* conv = std::get_if<ConvSpec>(&layer.kind)) {
            const auto& lp = learnable(params, i, layer);
            acts.outputs.push_back(conv_forward(*conv, lp.weights, lp.bias, *cur));
        } else if (std::holds_alternative<ReluSpec>(layer.kind)) {
            acts.outputs.push_back(relu_forward(*cur));
        } else if (const auto* pool = std::get_if<MaxPoolSpec>(&layer.kind)) {
            acts.outputs.push_back(maxpool_forward(*pool, *cur, acts.pool_argmax[i]));
        } else {
            const auto& lp = learnable(params, i, layer);
            acts.outputs.push_back(fc_forward(lp.weights, lp.bias, *cur));
        }
        cur = &acts.outputs.back();
    }
    return acts;
}

LossValue squared_loss(const Tensor4& pred, const Tensor4& target) {
    if (!pred.same_shape(target)) throw ShapeError("prediction/target shape mismatch");
    const std::int64_t n = pred.n();
    LossValue out;
    out.gradient = Tensor4(pred.n(), pred.c(), pred.h(), pred.w(), 0.0);
    const auto p = pred.flat();
    const auto t = target.flat();
    auto g = out.gradient.flat();
    double acc = 0.0;
    for (std::int64_t j = 0; j < pred.size(); ++j) {
        const double d = p[static_cast<std::size_t>(j)] - t[static_cast<std::size_t>(j)];
        acc += d * d;
        g[static_cast<std::size_t>(j)] = 2.0 * d / static_cast<double>(n);
    }
    out.value = acc / static_cast<double>(n);
    return out;
}

Gradients backward(const NetworkSpec& net, const Parameters& params, const Activations& acts,
                   const Tensor4& loss_gradient) {
    if (acts.outputs.size() != net.layers.size())
        throw ConsistencyError("activations do not match the network");
    const auto shapes = infer_shapes(net);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Tensor4& a = acts.outputs[i];
        if (shape_of(a) != shapes[i] || a.n() != acts.input.n())
            throw ConsistencyError("activation shape mismatch (stale activations?)");
    }
    if (!loss_gradient.same_shape(acts.outputs.back()))
        throw ShapeError("loss gradient does not match the prediction shape");

    Gradients grads;
    grads.params = zero_params(net);
    grads.inputs.resize(net.layers.size());

    const Tensor4* upstream = &loss_gradient;
    for (std::size_t idx = net.layers.size(); idx-- > 0;) {
        const LayerSpec& layer = net.layers[idx];
        const Tensor4& input = idx == 0 ? acts.input : acts.outputs[idx - 1];
        const Shape3 in_shape = shape_of(input);

        if (const auto* conv = std::get_if<ConvSpec>(&layer.kind)) {
            auto& g = *grads.params.layers[idx];
            conv_backward_params(*conv, input, *upstream, g.weights, g.bias);
            const auto& lp = learnable(params, idx, layer);
            grads.inputs[idx] = conv_backward_data(*conv, lp.weights, *upstream, in_shape);
        } else if (std::holds_alternative<ReluSpec>(layer.kind)) {
            grads.inputs[idx] = relu_backward(input, *upstream);
        } else if (const auto* pool = std::get_if<MaxPoolSpec>(&layer.kind)) {
            grads.inputs[idx] =
                maxpool_backward(*pool, acts.pool_argmax[idx], *upstream, in_shape);
        } else {
            auto& g = *grads.params.layers[idx];
            fc_backward_params(input, *upstream, g.weights, g.bias);
            const auto& lp = learnable(params, idx, layer);
            grads.inputs[idx] = fc_backward_data(lp.weights, *upstream, in_shape, input.n());
        }
        upstream = &grads.inputs[idx];
    }
    return grads;
}

Tensor4 predict(const NetworkSpec& net, const Parameters& params, const Tensor4& batch) {
    return forward(net, params, batch).outputs.back();
}

} // namespace mothpose::nn
