#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ngraph/autodiff/rng.hpp"
#include "ngraph/autodiff/tensor.hpp"

namespace ngraph::ad {

using Index = std::vector<std::size_t>;

enum class UnaryOp { identity, relu, gelu, tanh, sigmoid, leaky_relu, sin, exp, log, neg };
enum class BinaryOp { add, sub, mul, div };
enum class ReduceOp { sum, mean, max, std };

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kStdEps = 1e-8;

std::string_view to_string(UnaryOp op);

// Elementwise. Binary ops broadcast over trailing dimensions (numpy rules,
// shapes aligned on the right, extents equal or 1).
Tensor elementwise(UnaryOp op, const Tensor& a);
Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b);
Shape broadcast_shape(const Shape& a, const Shape& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::add, a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::sub, a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::mul, a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::div, a, b); }
inline Tensor operator-(const Tensor& a) { return elementwise(UnaryOp::neg, a); }

inline Tensor relu(const Tensor& a) { return elementwise(UnaryOp::relu, a); }
inline Tensor gelu(const Tensor& a) { return elementwise(UnaryOp::gelu, a); }
inline Tensor tanh(const Tensor& a) { return elementwise(UnaryOp::tanh, a); }
inline Tensor sigmoid(const Tensor& a) { return elementwise(UnaryOp::sigmoid, a); }
inline Tensor leaky_relu(const Tensor& a) { return elementwise(UnaryOp::leaky_relu, a); }
inline Tensor sin(const Tensor& a) { return elementwise(UnaryOp::sin, a); }
inline Tensor exp(const Tensor& a) { return elementwise(UnaryOp::exp, a); }
inline Tensor log(const Tensor& a) { return elementwise(UnaryOp::log, a); }

Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

/// [m,k] x [k,p] -> [m,p].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// Reduces `axis` away. max routes its gradient to the first argmax; std is
/// the population deviation with kStdEps under the root.
Tensor reduce(ReduceOp op, const Tensor& a, std::size_t axis);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

// Row gather/scatter over rank-2 tensors; the basis of message passing.
Tensor gather_rows(const Tensor& a, const Index& rows);
Tensor segment_sum(const Tensor& a, const Index& segment, std::size_t num_segments);
Tensor segment_mean(const Tensor& a, const Index& segment, std::size_t num_segments);
/// Empty segments produce zeros.
Tensor segment_max(const Tensor& a, const Index& segment, std::size_t num_segments);
/// Softmax over the rows sharing a segment id, independently per column.
Tensor segment_softmax(const Tensor& a, const Index& segment, std::size_t num_segments);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);

/// Per-row standardization without affine terms.
Tensor layer_norm_rows(const Tensor& a, double eps = 1e-5);

Tensor dropout(const Tensor& a, double rate, Rng& rng);

// Image ops over [batch, channels, height, width].
/// Stride 1, zero "same" padding with (k-1)/2 rows/cols before.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor avg_pool2d(const Tensor& x, std::size_t factor);
/// [B,C,H,W] -> [B,C].
Tensor global_avg_pool(const Tensor& x);
/// z + src on the first min(C_z, C_src) channels; src is average-pooled to
/// z's spatial size first. Works on [B,C] and [B,C,H,W].
Tensor residual_add(const Tensor& z, const Tensor& src);

// Losses, each a mean over the batch.
Tensor cross_entropy(const Tensor& logits, const Index& labels);
Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor bce_with_logits(const Tensor& logits, const Tensor& target);

}  // namespace ngraph::ad
