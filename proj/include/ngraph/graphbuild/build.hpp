#pragma once

#include <optional>
#include <span>

#include "ngraph/graphbuild/graph.hpp"

namespace ngraph::graph {

struct GraphOptions {
  std::optional<zoo::KernelSize> max_kernel;  // defaults to the largest kernel present
  LinearMode linear_mode = LinearMode::as_1x1_conv;
  FlattenMode flatten_mode = FlattenMode::adaptive;
  bool residual_edges = true;  // used by to_graph()
};

/// Window offset of a size-k kernel inside a size-window padded kernel.
std::size_t kernel_offset(std::size_t window, std::size_t k);

/// Raw neural graph (bias node features, weight edge features, no residual
/// edges) for any supported architecture. Throws GraphError for
/// unsupported combinations.
NeuralGraph build_graph(const zoo::Checkpoint& net, const GraphOptions& opts = {});
/// build_graph followed by add_residual_edges when requested.
NeuralGraph to_graph(const zoo::Checkpoint& net, const GraphOptions& opts = {});

/// Plain MLPs only (linear and norm layers); d_V = d_E = 1.
NeuralGraph mlp_to_graph(const zoo::Checkpoint& net);
NeuralGraph cnn_to_graph(const zoo::Checkpoint& net, zoo::KernelSize max_kernel, LinearMode linear_mode,
                         FlattenMode flatten_mode);
/// Networks starting with an attention layer; edges carry (Q, K, V).
NeuralGraph transformer_to_graph(const zoo::Checkpoint& net);
/// Standalone fragment of one norm layer: d input nodes, d nodes with
/// feature beta and d diagonal edges with feature gamma.
NeuralGraph norm_to_graph(std::span<const double> gamma, std::span<const double> beta,
                          zoo::KernelSize window = {1, 1});

/// Identity edges for every residual connection of the source network
/// (feature 1 at the scalar slot) on the first min(channels) nodes.
NeuralGraph add_residual_edges(const NeuralGraph& g, const zoo::Checkpoint& net);

/// Exact inverse of the constructors. Throws GraphError for graphs that were
/// not produced by them (or whose features were normalized).
zoo::Checkpoint graph_to_network(const NeuralGraph& g);

/// Band holding the output of source layer l (0 = input band).
std::size_t band_of_layer(const NeuralGraph& g, std::size_t layer);

}  // namespace ngraph::graph
