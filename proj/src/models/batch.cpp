#include "ngraph/models/batch.hpp"

#include "ngraph/graphbuild/features.hpp"
#include "ngraph/models/params.hpp"

namespace ngraph::models {

using ad::Tensor;
using graph::NeuralGraph;

GraphBatch make_batch(std::span<const NeuralGraph* const> graphs, const BatchOptions& opts) {
  if (graphs.empty()) throw ModelError("cannot batch zero graphs");
  GraphBatch b;
  b.num_graphs = graphs.size();
  std::size_t dv = graphs.front()->node_dim, de = graphs.front()->edge_dim;
  b.outputs_per_graph = graphs.front()->output_nodes().size();
  std::vector<double> nx, ex, px;
  b.node_offset.push_back(0);
  b.edge_offset.push_back(0);
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const NeuralGraph& g = *graphs[gi];
    graph::check_graph(g);
    if (g.node_dim != dv || g.edge_dim != de)
      throw ModelError("graph " + std::to_string(gi) + " has feature widths (" + std::to_string(g.node_dim) + ", " +
                       std::to_string(g.edge_dim) + "), batch has (" + std::to_string(dv) + ", " + std::to_string(de) + ")");
    auto outs = g.output_nodes();
    if (outs.size() != b.outputs_per_graph)
      throw ModelError("graph " + std::to_string(gi) + " has " + std::to_string(outs.size()) + " output nodes, batch has " +
                       std::to_string(b.outputs_per_graph));
    std::size_t off = b.num_nodes;
    nx.insert(nx.end(), g.node_features.begin(), g.node_features.end());
    ex.insert(ex.end(), g.edge_features.begin(), g.edge_features.end());
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
      b.node_graph.push_back(gi);
      b.activation.push_back(static_cast<std::size_t>(g.node_activation[i]));
      b.position.push_back(g.node_position[i]);
    }
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
      b.src.push_back(off + g.edge_src[e]);
      b.dst.push_back(off + g.edge_dst[e]);
      b.edge_graph.push_back(gi);
    }
    for (auto o : outs) b.output_nodes.push_back(off + o);

    if (opts.pairs) {
      std::size_t n = g.num_nodes, first_pair = b.num_pairs;
      std::size_t pw = de + 1;
      px.resize((first_pair + n * n) * pw, 0.0);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
          b.pair_src.push_back(off + i);
          b.pair_dst.push_back(off + j);
        }
      for (std::size_t e = 0; e < g.num_edges(); ++e) {
        std::size_t p = first_pair + g.edge_dst[e] * n + g.edge_src[e];
        b.edge_pair.push_back(p);
        auto f = g.edge_row(e);
        for (std::size_t c = 0; c < de; ++c) px[p * pw + c] += f[c];
        px[p * pw + de] = 1.0;
      }
      b.num_pairs += n * n;
    }
    if (opts.probe_nets) b.probe_nets.push_back(graph::probe_network(g));

    b.num_nodes += g.num_nodes;
    b.num_edges += g.num_edges();
    b.node_offset.push_back(b.num_nodes);
    b.edge_offset.push_back(b.num_edges);
  }
  b.node_x = Tensor::from({b.num_nodes, dv}, std::move(nx));
  b.edge_x = Tensor::from({b.num_edges, de}, std::move(ex));
  if (opts.pairs) b.pair_x = Tensor::from({b.num_pairs, de + 1}, std::move(px));
  return b;
}

GraphBatch make_batch(const NeuralGraph& g, const BatchOptions& opts) {
  const NeuralGraph* p = &g;
  return make_batch(std::span<const NeuralGraph* const>(&p, 1), opts);
}

}  // namespace ngraph::models
