#pragma once

#include <vector>

#include "ngraph/autodiff/ops.hpp"
#include "ngraph/autodiff/rng.hpp"
#include "ngraph/netzoo/checkpoint.hpp"

namespace ngraph::zoo {

/// Parameters of a checkpoint lifted into tensors, shaped per layer kind.
struct LayerTensors {
  ad::Tensor weight, bias, query, key, value;
};

struct NetworkTensors {
  std::vector<LayerTensors> layers;

  /// Every defined tensor, in layer order (for optimizers).
  std::vector<ad::Tensor> trainable() const;
};

NetworkTensors make_tensors(const Checkpoint& net, bool requires_grad);
/// Copies tensor values back into `net`'s parameter vectors.
void write_back(Checkpoint& net, const NetworkTensors& tensors);

/// Differentiable forward pass.
///
/// Input layouts: dense nets take [B, d_0] (or [d_0]); conv nets take
/// [B, C, H, W] (or [C, H, W]); attention nets take one token sequence
/// [T, d_0]. Dense layers after convolutions see the adaptive (global
/// average) pool unless a flatten layer is present.
ad::Tensor forward(const std::vector<LayerSpec>& spec, const NetworkTensors& params, const ad::Tensor& x);

/// Like forward() on a batched input, returning the input followed by every
/// layer's output (post-activation, post-pool).
std::vector<ad::Tensor> forward_all(const std::vector<LayerSpec>& spec, const NetworkTensors& params,
                                    const ad::Tensor& x);

/// Reference evaluation of a checkpoint.
ad::Tensor evaluate(const Checkpoint& net, const ad::Tensor& x);

/// Fresh parameters: uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and
/// biases, norm gamma = 1 and beta = 0.
Checkpoint init_checkpoint(std::vector<LayerSpec> spec, ad::Rng& rng);

}  // namespace ngraph::zoo
