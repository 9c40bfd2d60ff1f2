#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "mothpose/nn/engine.hpp"

namespace mothpose::nn {

/// Hyperparameters of one training run. The defaults are the toolkit-wide
/// default configuration (base rate 1e-12, batch 32, 10,000 iterations).
/// The optional solver knobs (momentum, step decay) default off: plain
/// fixed-rate SGD.
struct TrainConfig {
    double base_learning_rate = 1e-12;
    std::int64_t batch_size = 32;
    std::int64_t iterations = 10000;
    std::int64_t train_log_window = 200;
    std::int64_t test_eval_every = 500;
    std::uint64_t rng_seed = 0;

    double momentum = 0.0;
    double lr_decay = 1.0;           // multiply the base rate by this ...
    std::int64_t lr_decay_every = 0; // ... every this many iterations (0 = never)
    std::int64_t snapshot_every = 0; // parameter snapshot cadence (0 = never)
};

/// One loss-history row; absent values are NaN (written as empty CSV
/// fields). Train losses are window averages; test losses full-set.
struct LossRecord {
    std::int64_t iteration = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
};
using LossHistory = std::vector<LossRecord>;

/// Ordered supply of training batches; train() cycles through indices
/// 0..batch_count-1 and wraps.
class BatchSource {
public:
    virtual ~BatchSource() = default;
    virtual std::int64_t batch_count() const = 0;
    virtual void load(std::int64_t index, Tensor4& data, Tensor4& labels) = 0;
};

/// Slices a fully in-memory dataset into consecutive batches of batch_size;
/// a trailing remainder smaller than batch_size is dropped.
class InMemoryBatches final : public BatchSource {
public:
    InMemoryBatches(Tensor4 data, Tensor4 labels, std::int64_t batch_size);
    std::int64_t batch_count() const override { return count_; }
    void load(std::int64_t index, Tensor4& data, Tensor4& labels) override;

private:
    Tensor4 data_;
    Tensor4 labels_;
    std::int64_t batch_size_ = 0;
    std::int64_t count_ = 0;
};

/// One SGD update: every learnable parameter moves by
/// -(base rate x that layer's multiplier) x gradient. Multiplier-0 layers
/// are skipped untouched. Throws DivergenceError on a non-finite gradient
/// that is about to be applied.
void sgd_step(const NetworkSpec& net, Parameters& params, const Gradients& grads,
              double base_learning_rate);

using SnapshotHook = std::function<void(std::int64_t iteration, const Parameters&)>;

/// Mini-batch SGD over the batch source (in order, wrapping). Records the
/// windowed training loss every train_log_window iterations and, when a
/// test set is given, the test loss every test_eval_every iterations.
/// Throws DivergenceError when the loss goes non-finite or exceeds 1e6x
/// its initial value. Bit-deterministic in (params, batches, config) for
/// any thread count.
LossHistory train(const NetworkSpec& net, Parameters& params, BatchSource& batches,
                  const TrainConfig& config, const Tensor4* test_data = nullptr,
                  const Tensor4* test_labels = nullptr, const SnapshotHook& snapshot = {});

/// CSV round-trip: header iteration,train_loss,test_loss; empty fields for
/// absent values; %.17g so re-reading is bit-exact.
void write_loss_history(const LossHistory& history, const std::filesystem::path& path);
LossHistory read_loss_history(const std::filesystem::path& path);

} // namespace mothpose::nn
