#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ngraph/autodiff/ops.hpp"
#include "ngraph/netzoo/checkpoint.hpp"
#include "ngraph/netzoo/permutation.hpp"

namespace ngraph::graph {

using zoo::Activation;
using zoo::LayerKind;

class GraphError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class IoRole : std::uint8_t { input, hidden, output };
enum class EdgeKind : std::uint8_t { weight, residual, virtual_link };
enum class LinearMode { as_mlp, as_1x1_conv };
enum class FlattenMode { adaptive, repeat_nodes, virtual_layer };
enum class BandKind : std::uint8_t { input, layer, heads, virtual_layer };

std::string_view to_string(LinearMode m);
std::string_view to_string(FlattenMode m);
std::string_view to_string(BandKind k);
LinearMode parse_linear_mode(std::string_view s);
FlattenMode parse_flatten_mode(std::string_view s);
BandKind parse_band_kind(std::string_view s);

/// A contiguous run of nodes coming from one neuron group of the source
/// network. Spatially indexed bands (repeat-nodes / virtual-layer flatten
/// modes) hold `channels * spatial` nodes ordered channel-major.
struct Band {
  BandKind kind = BandKind::layer;
  std::size_t layer = 0;  // source layer (1-based), 0 for the input band
  std::size_t group = 0;  // neuron group of the source network
  std::size_t first = 0;
  std::size_t channels = 0;
  std::size_t spatial = 1;

  std::size_t size() const { return channels * spatial; }
  bool operator==(const Band&) const = default;
};

/// Geometry of the feature vectors.
struct GraphLayout {
  std::size_t window_width = 1;   // padded kernel window (1x1 for MLPs)
  std::size_t window_height = 1;
  std::size_t base_edge_dim = 1;  // window area, or 3 (Q,K,V) for attention graphs
  std::size_t scalar_slot = 0;    // slot of scalar weights, norm scales and residual/virtual links
  std::size_t linear_slot = 0;    // slot of linear-layer weights
  LinearMode linear_mode = LinearMode::as_1x1_conv;
  FlattenMode flatten_mode = FlattenMode::adaptive;
  bool direction = false;   // backward copies present (second channel block)
  bool undirected = false;  // E + E^T block present (third channel block)
  bool normalized = false;
  std::size_t probe_channels = 0;
  std::size_t activation_channels = 0;
  std::size_t position_channels = 0;

  bool operator==(const GraphLayout&) const = default;
};

/// Per-band statistics of a layerwise normalization.
struct BandStats {
  std::vector<double> weight_mean, weight_std;  // one entry per statistic channel
  double bias_mean = 0.0, bias_std = 1.0;
  bool operator==(const BandStats&) const = default;
};

struct NeuralGraph {
  std::size_t num_nodes = 0;
  std::size_t node_dim = 1;
  std::vector<double> node_features;  // num_nodes x node_dim; channel 0 is the bias
  std::vector<std::size_t> node_band;
  std::vector<std::size_t> node_index;    // channel index within the band
  std::vector<std::size_t> node_spatial;  // spatial copy index (0 unless repeated/virtual)
  std::vector<IoRole> node_role;
  std::vector<Activation> node_activation;
  std::vector<std::size_t> node_position;  // positional-embedding slot

  std::size_t edge_dim = 1;
  ad::Index edge_src, edge_dst;
  std::vector<EdgeKind> edge_kind;
  std::vector<std::uint8_t> edge_backward;  // 1 for backward copies
  std::vector<double> edge_features;        // num_edges x edge_dim

  std::vector<Band> bands;
  GraphLayout layout;
  std::vector<zoo::LayerSpec> spec;  // source architecture
  std::vector<BandStats> stats;      // filled by normalize_layerwise
  std::map<std::string, std::string> metadata;  // copied from the checkpoint

  std::size_t num_edges() const { return edge_src.size(); }
  std::span<const double> node_row(std::size_t i) const { return {node_features.data() + i * node_dim, node_dim}; }
  std::span<const double> edge_row(std::size_t e) const { return {edge_features.data() + e * edge_dim, edge_dim}; }
  std::span<double> edge_row(std::size_t e) { return {edge_features.data() + e * edge_dim, edge_dim}; }
  std::size_t input_dim() const { return bands.empty() ? 0 : bands.front().size(); }
  /// Nodes of the last band, in index order.
  std::vector<std::size_t> output_nodes() const;
  std::size_t num_position_slots() const;

  bool operator==(const NeuralGraph&) const = default;
};

/// Appends one edge (no sorting).
void push_edge(NeuralGraph& g, std::size_t src, std::size_t dst, EdgeKind kind, bool backward,
               std::span<const double> features);
/// Orders edges by (dst, src, backward, kind), the canonical order used for
/// exact comparisons and deterministic aggregation.
void sort_edges(NeuralGraph& g);
/// Checks array lengths, index ranges and band coverage.
void check_graph(const NeuralGraph& g);

/// Node relabelling induced by a neuron permutation of the source network,
/// in gather form: node i of the permuted graph is node perm[i] of `g`.
std::vector<std::size_t> node_permutation(const NeuralGraph& g, const zoo::NeuronPermutation& p);
/// Applies a gather-form node permutation and restores canonical edge order.
/// node_index is positional and stays in place; everything else moves with
/// its node.
NeuralGraph permute_graph(const NeuralGraph& g, const std::vector<std::size_t>& perm);

/// Dense n x n x edge_dim tensor of the edge list (tests and small graphs only).
std::vector<double> dense_edges(const NeuralGraph& g);

}  // namespace ngraph::graph
