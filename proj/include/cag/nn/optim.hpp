#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cag/nn/params.hpp"

namespace cag::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update with explicit gradients, one per parameter in
// store order. Throws ContractError on a count or shape mismatch.
void adam_step(ParamStore& store, const std::vector<Mat>& grads, const AdamConfig& cfg);
// Same, using the gradients accumulated in the store (missing = zero).
void adam_step(ParamStore& store, const AdamConfig& cfg);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  // "param[index]" of the worst coordinate
};

// Compares backprop against central differences on a random subsample of at
// least `samples` coordinates (every coordinate if the model is smaller).
// Half the sample is drawn from coordinates with a nonzero analytic gradient.
// Relative error is |a - n| / max(|a|, |n|, floor). Throws ContractError for
// epsilon <= 0. Leaves the store's gradients zeroed.
GradCheckResult grad_check(const std::function<Var()>& loss_fn, ParamStore& store, double epsilon,
                           std::size_t samples = 200, std::uint64_t seed = 0, double floor = 1e-6);

// Versioned binary checkpoint: magic "CAGCKPT1", config digest, then a table
// of (name, dims, row-major little-endian float32 data).
void save_checkpoint(const ParamStore& store, const std::string& config_digest, const std::string& path);
// Loads into an already-built store. Throws DataError on bad magic, digest
// mismatch, or any name/shape mismatch.
void load_checkpoint(ParamStore& store, const std::string& config_digest, const std::string& path);

}  // namespace cag::nn
