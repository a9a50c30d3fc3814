#pragma once

#include <span>
#include <vector>

#include "ngraph/autodiff/ops.hpp"
#include "ngraph/graphbuild/graph.hpp"
#include "ngraph/netzoo/checkpoint.hpp"

namespace ngraph::models {

struct BatchOptions {
  bool pairs = false;       // all ordered node pairs per graph (needed by NG-T)
  bool probe_nets = false;  // source networks for learnable probe features
};

/// Disjoint union of graphs. Node and edge indices are offset per graph;
/// all graphs must share node and edge feature widths and the number of
/// output nodes.
struct GraphBatch {
  std::size_t num_graphs = 0, num_nodes = 0, num_edges = 0;
  ad::Tensor node_x;  // [N, d_V]
  ad::Tensor edge_x;  // [E, d_E]
  ad::Index src, dst, node_graph, edge_graph;
  ad::Index activation, position;  // per node
  std::size_t outputs_per_graph = 0;
  ad::Index output_nodes;  // graph-major, output-index order
  std::vector<std::size_t> node_offset, edge_offset;  // num_graphs + 1 entries

  // Pairs (i -> j) of every graph ordered by destination, then source,
  // self pairs included. pair_x holds the summed raw features of the edges
  // joining the pair plus a final existence channel.
  std::size_t num_pairs = 0;
  ad::Index pair_src, pair_dst, edge_pair;
  ad::Tensor pair_x;  // [P, d_E + 1]

  std::vector<zoo::Checkpoint> probe_nets;

  std::size_t node_dim() const { return node_x.dim(1); }
  std::size_t edge_dim() const { return edge_x.dim(1); }
};

GraphBatch make_batch(std::span<const graph::NeuralGraph* const> graphs, const BatchOptions& opts = {});
GraphBatch make_batch(const graph::NeuralGraph& g, const BatchOptions& opts = {});

}  // namespace ngraph::models
