#pragma once

#include <string>
#include <vector>

#include "ngraph/graphbuild/graph.hpp"

namespace ngraph::graph {

/// Binary graph file: the magic line "NGRAPH1\n", a little-endian u64 header
/// length, a JSON header (sizes, layout, bands, per-node roles and
/// activation ids, source spec, statistics, metadata) and raw little-endian
/// blobs for node features, edge indices, edge kinds and edge features.
std::vector<std::uint8_t> graph_to_bytes(const NeuralGraph& g);
/// Throws util::FormatError on truncation, bad magic or inconsistent sizes.
NeuralGraph graph_from_bytes(const std::vector<std::uint8_t>& bytes);

void save_graph(const NeuralGraph& g, const std::string& path);
NeuralGraph load_graph(const std::string& path);

}  // namespace ngraph::graph
