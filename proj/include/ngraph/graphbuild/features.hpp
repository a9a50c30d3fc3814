#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ngraph/autodiff/ops.hpp"
#include "ngraph/autodiff/rng.hpp"
#include "ngraph/graphbuild/graph.hpp"

namespace ngraph::graph {

/// One embedding row per activation id (rows in zoo::Activation order).
struct ActivationTable {
  std::size_t dim = 8;
  std::vector<double> rows;  // kNumActivations x dim
};
ActivationTable make_activation_table(std::size_t dim, ad::Rng& rng);

/// Appends the embedding of each node's activation id. Input nodes carry
/// the identity activation.
NeuralGraph attach_activation_embeddings(const NeuralGraph& g, const ActivationTable& table);

/// Rows indexed by positional slot: input nodes and output nodes own unique
/// slots, hidden bands share one slot per band (per spatial copy for
/// repeated/virtual bands). See NeuralGraph::node_position.
struct PositionalEmbeddings {
  std::size_t dim = 16;
  std::size_t slots = 0;
  std::vector<double> rows;  // slots x dim
};
PositionalEmbeddings make_positional_embeddings(std::size_t slots, std::size_t dim, ad::Rng& rng);
NeuralGraph attach_positional_embeddings(const NeuralGraph& g, const PositionalEmbeddings& pe);

/// Adds a backward copy of every edge; the copy carries the features in a
/// second channel block, the forward edge keeps them in the first. With
/// `undirected`, a third block holding E + E^T is filled on both copies.
/// Throws if direction features are already present.
NeuralGraph attach_direction_features(const NeuralGraph& g, bool undirected = false);

/// Which base-block slots of weight edge `e` hold real parameters (padding
/// excluded) and which statistic channel each slot belongs to.
std::vector<int> real_slots(const NeuralGraph& g, std::size_t e);
std::size_t stat_channels(const NeuralGraph& g);

/// Per-band mean/std of weights and biases over a training set, aligned by
/// band position. Residual and virtual edges are excluded.
std::vector<BandStats> layerwise_stats(std::span<const NeuralGraph> graphs);
/// Standardizes weights and biases with given statistics (std clamped to
/// 1e-6). Must run before direction features are attached.
NeuralGraph apply_layerwise_normalization(const NeuralGraph& g, const std::vector<BandStats>& stats);
std::pair<std::vector<NeuralGraph>, std::vector<BandStats>> normalize_layerwise(std::span<const NeuralGraph> graphs);
/// Inverse of apply_layerwise_normalization (up to rounding).
NeuralGraph denormalize(const NeuralGraph& g);

/// Post-activation value of every node for each probe input, computed
/// differentiably with respect to `probes` [M, d_0]; returns [n, M]. Only
/// dense networks (linear/norm layers, residuals) are supported.
ad::Tensor probe_values(const NeuralGraph& g, const ad::Tensor& probes);
/// Network whose node values probe_values() reports; lets callers convert
/// once and probe repeatedly.
zoo::Checkpoint probe_network(const NeuralGraph& g);
ad::Tensor probe_values(const zoo::Checkpoint& net, const ad::Tensor& probes);
/// Appends M probe channels to the node features.
NeuralGraph attach_probe_features(const NeuralGraph& g, const ad::Tensor& probes);
/// M probe points uniform in [-1, 1]^{d_0}.
ad::Tensor make_probes(std::size_t count, std::size_t input_dim, ad::Rng& rng, bool trainable);

}  // namespace ngraph::graph
