#pragma once

#include <cstddef>
#include <vector>

#include "ifthen/tensor.hpp"

namespace ifthen {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates, one pair of buffers per parameter. Sized on
// the first step; the parameter list must stay stable across steps.
struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// L2 norm over the concatenation of all parameter gradients. Parameters
// without a gradient buffer contribute zero.
double global_grad_norm(const std::vector<Tensor>& params);

// Rescales every gradient by max_norm / norm when the global norm exceeds
// max_norm.
void clip_global_norm(const std::vector<Tensor>& params, double max_norm);

// One bias-corrected Adam update over all parameters. Every gradient is
// checked for finiteness before anything is mutated, so a NonFiniteGradient
// throw leaves parameters and state untouched.
void adam_step(const std::vector<Tensor>& params, AdamState& state, const AdamConfig& config);

}  // namespace ifthen
