#pragma once

#include "ngraph/autodiff/tensor.hpp"
#include "ngraph/graphbuild/graph.hpp"

namespace ngraph::graph {

/// Runs the computation encoded by a raw (unnormalized) graph directly on
/// its edge list: every node sums bias plus incoming edge messages, then
/// applies its activation. Spatial bands carry feature maps; kernels are
/// read from the padded window. Accepts the same input layouts as
/// zoo::evaluate and returns the same shape.
///
/// Attention graphs are rejected since softmax attention is not encoded.
ad::Tensor forward_on_graph(const NeuralGraph& g, const ad::Tensor& x);

}  // namespace ngraph::graph
