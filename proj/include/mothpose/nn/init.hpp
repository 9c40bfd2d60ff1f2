#pragma once

#include <cstdint>

#include "mothpose/nn/params.hpp"

namespace mothpose::nn {

/// Draws initial parameters for every learnable layer, deterministically in
/// rng_seed (each layer gets an independent derived stream, so edits to one
/// layer never shift another's draws).
///
/// Archive entries override the per-layer scheme whenever the layer name is
/// present (snapshot-resume / pretrained import). Otherwise: Xavier draws
/// uniform on +-sqrt(6/(fan_in+fan_out)); Gaussian draws N(mean, stddev);
/// Constant fills the given value. Biases start at 0 under every scheme.
/// A PretrainedByName layer whose name is absent (or with no archive at
/// all) throws MissingWeightsError.
Parameters init_params(const NetworkSpec& net, std::uint64_t rng_seed,
                       const NamedParams* archive = nullptr);

} // namespace mothpose::nn
