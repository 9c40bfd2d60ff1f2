#include "mothpose/nn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "mothpose/nn/init.hpp"
#include "mothpose/rng.hpp"

namespace mothpose::nn {

namespace {

double xavier_bound(const LayerSpec& layer, const Shape3& in) {
    double fan_in = 0, fan_out = 0;
    if (const auto* conv = std::get_if<ConvSpec>(&layer.kind)) {
        fan_in = double(in.c) * conv->kernel * conv->kernel;
        fan_out = double(conv->out_channels) * conv->kernel * conv->kernel;
    } else {
        fan_in = static_cast<double>(in.volume());
        fan_out = std::get<FullyConnectedSpec>(layer.kind).out_neurons;
    }
    return std::sqrt(6.0 / (fan_in + fan_out));
}

void check_archived_shape(const LayerSpec& layer, const LayerParams& fresh,
                          const LayerParams& archived) {
    if (!archived.weights.same_shape(fresh.weights))
        throw ShapeError("archived weights for " + layer.name + " have the wrong shape");
    if (archived.bias.size() != fresh.bias.size())
        throw ShapeError("archived bias for " + layer.name + " has the wrong length");
}

} // namespace

Parameters init_params(const NetworkSpec& net, std::uint64_t rng_seed,
                       const NamedParams* archive) {
    Parameters params = zero_params(net);
    Shape3 in = net.input;
    const auto shapes = infer_shapes(net);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& layer = net.layers[i];
        if (has_parameters(layer)) {
            LayerParams& lp = *params.layers[i];
            const NamedParams::const_iterator hit =
                archive ? archive->find(layer.name) : NamedParams::const_iterator{};
            if (archive && hit != archive->end()) {
                check_archived_shape(layer, lp, hit->second);
                lp = hit->second;
            } else if (std::holds_alternative<PretrainedByName>(layer.init)) {
                throw MissingWeightsError("layer " + layer.name +
                                          " needs pretrained weights but the archive has none");
            } else if (std::holds_alternative<XavierInit>(layer.init)) {
                Rng rng = Rng::derive(rng_seed, i);
                const double bound = xavier_bound(layer, in);
                for (double& w : lp.weights.flat()) w = rng.uniform(-bound, bound);
            } else if (const auto* g = std::get_if<GaussianInit>(&layer.init)) {
                Rng rng = Rng::derive(rng_seed, i);
                for (double& w : lp.weights.flat()) w = rng.gaussian(g->mean, g->stddev);
            } else {
                lp.weights.fill(std::get<ConstantInit>(layer.init).value);
            }
        }
        in = shapes[i];
    }
    return params;
}

InMemoryBatches::InMemoryBatches(Tensor4 data, Tensor4 labels, std::int64_t batch_size)
    : data_(std::move(data)), labels_(std::move(labels)), batch_size_(batch_size) {
    if (batch_size_ < 1) throw ValidationError("batch size must be >= 1");
    if (data_.n() != labels_.n()) throw ShapeError("data/label sample counts differ");
    count_ = data_.n() / batch_size_;
    if (count_ < 1) throw SizeError("fewer samples than one batch");
}

void InMemoryBatches::load(std::int64_t index, Tensor4& data, Tensor4& labels) {
    if (index < 0 || index >= count_) throw BoundsError("batch index out of range");
    data = Tensor4(batch_size_, data_.c(), data_.h(), data_.w());
    labels = Tensor4(batch_size_, labels_.c(), labels_.h(), labels_.w());
    const std::int64_t first = index * batch_size_;
    std::copy_n(data_.sample(first), batch_size_ * data_.sample_size(), data.data());
    std::copy_n(labels_.sample(first), batch_size_ * labels_.sample_size(), labels.data());
}

void sgd_step(const NetworkSpec& net, Parameters& params, const Gradients& grads,
              double base_learning_rate) {
    if (params.layers.size() != net.layers.size() ||
        grads.params.layers.size() != net.layers.size())
        throw ConsistencyError("parameters/gradients do not align with the network");
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!has_parameters(net.layers[i])) continue;
        LayerParams& p = *params.layers[i];
        const LayerParams& g = *grads.params.layers[i];
        const double wr = base_learning_rate * net.layers[i].weight_lr_multiplier;
        const double br = base_learning_rate * net.layers[i].bias_lr_multiplier;
        if (wr != 0.0) {
            if (!p.weights.same_shape(g.weights)) throw ShapeError("gradient shape mismatch");
            auto w = p.weights.flat();
            const auto gw = g.weights.flat();
            for (std::size_t j = 0; j < w.size(); ++j) {
                if (!std::isfinite(gw[j]))
                    throw DivergenceError("non-finite weight gradient in " + net.layers[i].name);
                w[j] -= wr * gw[j];
            }
        }
        if (br != 0.0) {
            if (p.bias.size() != g.bias.size()) throw ShapeError("bias gradient length mismatch");
            for (std::size_t j = 0; j < p.bias.size(); ++j) {
                if (!std::isfinite(g.bias[j]))
                    throw DivergenceError("non-finite bias gradient in " + net.layers[i].name);
                p.bias[j] -= br * g.bias[j];
            }
        }
    }
}

namespace {

/// Full-set loss evaluated in fixed-size chunks (fixed order, so the
/// result does not depend on memory limits or thread count).
double dataset_loss(const NetworkSpec& net, const Parameters& params, const Tensor4& data,
                    const Tensor4& labels, std::int64_t chunk) {
    if (data.n() != labels.n()) throw ShapeError("test data/label counts differ");
    double total = 0.0;
    for (std::int64_t first = 0; first < data.n(); first += chunk) {
        const std::int64_t n = std::min(chunk, data.n() - first);
        Tensor4 d(n, data.c(), data.h(), data.w());
        Tensor4 l(n, labels.c(), labels.h(), labels.w());
        std::copy_n(data.sample(first), n * data.sample_size(), d.data());
        std::copy_n(labels.sample(first), n * labels.sample_size(), l.data());
        const Tensor4 pred = predict(net, params, d);
        total += squared_loss(pred, l).value * static_cast<double>(n);
    }
    return total / static_cast<double>(data.n());
}

void apply_momentum_step(const NetworkSpec& net, Parameters& params, Parameters& velocity,
                         const Gradients& grads, double base_rate, double momentum) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!has_parameters(net.layers[i])) continue;
        LayerParams& p = *params.layers[i];
        LayerParams& v = *velocity.layers[i];
        const LayerParams& g = *grads.params.layers[i];
        const double wr = base_rate * net.layers[i].weight_lr_multiplier;
        const double br = base_rate * net.layers[i].bias_lr_multiplier;
        if (wr != 0.0) {
            auto w = p.weights.flat();
            auto vel = v.weights.flat();
            const auto gw = g.weights.flat();
            for (std::size_t j = 0; j < w.size(); ++j) {
                if (!std::isfinite(gw[j]))
                    throw DivergenceError("non-finite weight gradient in " + net.layers[i].name);
                vel[j] = momentum * vel[j] - wr * gw[j];
                w[j] += vel[j];
            }
        }
        if (br != 0.0) {
            for (std::size_t j = 0; j < p.bias.size(); ++j) {
                if (!std::isfinite(g.bias[j]))
                    throw DivergenceError("non-finite bias gradient in " + net.layers[i].name);
                v.bias[j] = momentum * v.bias[j] - br * g.bias[j];
                p.bias[j] += v.bias[j];
            }
        }
    }
}

} // namespace

LossHistory train(const NetworkSpec& net, Parameters& params, BatchSource& batches,
                  const TrainConfig& config, const Tensor4* test_data, const Tensor4* test_labels,
                  const SnapshotHook& snapshot) {
    if (config.base_learning_rate <= 0.0)
        throw ValidationError("base learning rate must be positive");
    if (config.batch_size < 1) throw ValidationError("batch size must be >= 1");
    if (config.iterations < 1) throw ValidationError("iteration count must be >= 1");
    if ((test_data == nullptr) != (test_labels == nullptr))
        throw ValidationError("test data and labels must be given together");
    if (batches.batch_count() < 1) throw SizeError("no training batches");

    LossHistory history;
    Parameters velocity;
    if (config.momentum != 0.0) velocity = zero_params(net);

    double rate = config.base_learning_rate;
    double initial_loss = 0.0;
    double window_sum = 0.0;
    std::int64_t window_n = 0;
    Tensor4 data, labels;

    for (std::int64_t it = 1; it <= config.iterations; ++it) {
        batches.load((it - 1) % batches.batch_count(), data, labels);
        const Activations acts = forward(net, params, data);
        const LossValue loss = squared_loss(acts.predictions(), labels);

        if (!std::isfinite(loss.value))
            throw DivergenceError("loss diverged (non-finite) at iteration " + std::to_string(it));
        if (it == 1) initial_loss = loss.value;
        else if (initial_loss > 0.0 && loss.value > 1e6 * initial_loss)
            throw DivergenceError("loss diverged (exceeded 1e6x initial) at iteration " +
                                  std::to_string(it));

        const Gradients grads = backward(net, params, acts, loss.gradient);
        if (config.momentum != 0.0)
            apply_momentum_step(net, params, velocity, grads, rate, config.momentum);
        else
            sgd_step(net, params, grads, rate);

        window_sum += loss.value;
        ++window_n;

        const bool log_train = it % config.train_log_window == 0;
        const bool log_test = test_data != nullptr && it % config.test_eval_every == 0;
        if (log_train || log_test) {
            LossRecord rec;
            rec.iteration = it;
            rec.train_loss = log_train ? window_sum / static_cast<double>(window_n)
                                       : std::numeric_limits<double>::quiet_NaN();
            rec.test_loss = log_test ? dataset_loss(net, params, *test_data, *test_labels,
                                                    config.batch_size)
                                     : std::numeric_limits<double>::quiet_NaN();
            history.push_back(rec);
            if (log_train) {
                window_sum = 0.0;
                window_n = 0;
            }
        }
        if (snapshot && config.snapshot_every > 0 && it % config.snapshot_every == 0)
            snapshot(it, params);
        if (config.lr_decay_every > 0 && it % config.lr_decay_every == 0)
            rate *= config.lr_decay;
    }
    return history;
}

void write_loss_history(const LossHistory& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "iteration,train_loss,test_loss\n";
    char buf[64];
    for (const LossRecord& rec : history) {
        out << rec.iteration << ',';
        if (std::isfinite(rec.train_loss)) {
            std::snprintf(buf, sizeof buf, "%.17g", rec.train_loss);
            out << buf;
        }
        out << ',';
        if (std::isfinite(rec.test_loss)) {
            std::snprintf(buf, sizeof buf, "%.17g", rec.test_loss);
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

LossHistory read_loss_history(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "iteration,train_loss,test_loss")
        throw FormatError("bad loss history header in " + path.string());
    LossHistory history;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string it_s, train_s, test_s;
        if (!std::getline(ss, it_s, ',') || !std::getline(ss, train_s, ','))
            throw FormatError("bad loss history row: " + line);
        std::getline(ss, test_s, ',');
        LossRecord rec;
        rec.iteration = std::stoll(it_s);
        rec.train_loss =
            train_s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(train_s);
        rec.test_loss =
            test_s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(test_s);
        history.push_back(rec);
    }
    return history;
}

} // namespace mothpose::nn
