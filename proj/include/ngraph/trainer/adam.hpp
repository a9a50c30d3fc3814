#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ngraph/autodiff/tensor.hpp"

namespace ngraph::train {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m, v;
};

/// One Adam update with bias correction. `params[i]` and `grads[i]` must have
/// equal lengths; state buffers are sized on first use.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamConfig& cfg);

/// Updates leaf tensors in place from their accumulated gradients (tensors
/// without a gradient count as zero gradient), then clears the gradients.
void adam_step(std::vector<ad::Tensor>& params, AdamState& state, const AdamConfig& cfg);

}  // namespace ngraph::train
