#include "ngraph/graphbuild/graph.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <tuple>
#include <utility>

namespace ngraph::graph {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<E, std::string_view>, N>& table, const char* what) {
  for (auto& [v, name] : table)
    if (name == s) return v;
  throw std::invalid_argument(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view enum_name(E e, const std::array<std::pair<E, std::string_view>, N>& table) {
  for (auto& [v, name] : table)
    if (v == e) return name;
  return "?";
}

constexpr std::array<std::pair<LinearMode, std::string_view>, 2> kLinearModes{{
    {LinearMode::as_mlp, "as-mlp"},
    {LinearMode::as_1x1_conv, "as-1x1-conv"},
}};

constexpr std::array<std::pair<FlattenMode, std::string_view>, 3> kFlattenModes{{
    {FlattenMode::adaptive, "adaptive"},
    {FlattenMode::repeat_nodes, "repeat-nodes"},
    {FlattenMode::virtual_layer, "virtual-layer"},
}};

constexpr std::array<std::pair<BandKind, std::string_view>, 4> kBandKinds{{
    {BandKind::input, "input"},
    {BandKind::layer, "layer"},
    {BandKind::heads, "heads"},
    {BandKind::virtual_layer, "virtual"},
}};

}  // namespace

std::string_view to_string(LinearMode m) { return enum_name(m, kLinearModes); }
std::string_view to_string(FlattenMode m) { return enum_name(m, kFlattenModes); }
std::string_view to_string(BandKind k) { return enum_name(k, kBandKinds); }
LinearMode parse_linear_mode(std::string_view s) { return parse_enum(s, kLinearModes, "linear mode"); }
FlattenMode parse_flatten_mode(std::string_view s) { return parse_enum(s, kFlattenModes, "flatten mode"); }
BandKind parse_band_kind(std::string_view s) { return parse_enum(s, kBandKinds, "band kind"); }

std::vector<std::size_t> NeuralGraph::output_nodes() const {
  std::vector<std::size_t> out;
  if (bands.empty()) return out;
  const Band& b = bands.back();
  for (std::size_t i = 0; i < b.size(); ++i) out.push_back(b.first + i);
  return out;
}

std::size_t NeuralGraph::num_position_slots() const {
  std::size_t m = 0;
  for (auto p : node_position) m = std::max(m, p + 1);
  return m;
}

void push_edge(NeuralGraph& g, std::size_t src, std::size_t dst, EdgeKind kind, bool backward,
               std::span<const double> features) {
  if (features.size() != g.edge_dim)
    throw GraphError("edge feature has " + std::to_string(features.size()) + " channels, graph has " +
                     std::to_string(g.edge_dim));
  g.edge_src.push_back(src);
  g.edge_dst.push_back(dst);
  g.edge_kind.push_back(kind);
  g.edge_backward.push_back(backward ? 1 : 0);
  g.edge_features.insert(g.edge_features.end(), features.begin(), features.end());
}

void sort_edges(NeuralGraph& g) {
  std::size_t m = g.num_edges();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t e) { return std::tuple(g.edge_dst[e], g.edge_src[e], g.edge_backward[e], g.edge_kind[e]); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  NeuralGraph out;
  out.edge_dim = g.edge_dim;
  for (std::size_t e : order) push_edge(out, g.edge_src[e], g.edge_dst[e], g.edge_kind[e], g.edge_backward[e], g.edge_row(e));
  g.edge_src = std::move(out.edge_src);
  g.edge_dst = std::move(out.edge_dst);
  g.edge_kind = std::move(out.edge_kind);
  g.edge_backward = std::move(out.edge_backward);
  g.edge_features = std::move(out.edge_features);
}

void check_graph(const NeuralGraph& g) {
  std::size_t n = g.num_nodes;
  auto need = [&](std::size_t have, std::size_t want, const char* what) {
    if (have != want)
      throw GraphError(std::string(what) + " has " + std::to_string(have) + " entries, expected " + std::to_string(want));
  };
  need(g.node_features.size(), n * g.node_dim, "node feature matrix");
  need(g.node_band.size(), n, "node band list");
  need(g.node_index.size(), n, "node index list");
  need(g.node_spatial.size(), n, "node spatial list");
  need(g.node_role.size(), n, "node role list");
  need(g.node_activation.size(), n, "node activation list");
  need(g.node_position.size(), n, "node position list");
  std::size_t m = g.edge_src.size();
  need(g.edge_dst.size(), m, "edge destination list");
  need(g.edge_kind.size(), m, "edge kind list");
  need(g.edge_backward.size(), m, "edge direction list");
  need(g.edge_features.size(), m * g.edge_dim, "edge feature matrix");
  for (std::size_t e = 0; e < m; ++e)
    if (g.edge_src[e] >= n || g.edge_dst[e] >= n)
      throw GraphError("edge " + std::to_string(e) + " references node " +
                       std::to_string(std::max(g.edge_src[e], g.edge_dst[e])) + " of " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i)
    if (g.node_band[i] >= g.bands.size())
      throw GraphError("node " + std::to_string(i) + " names band " + std::to_string(g.node_band[i]) + " of " +
                       std::to_string(g.bands.size()));
  std::size_t next = 0;
  for (std::size_t b = 0; b < g.bands.size(); ++b) {
    if (g.bands[b].first != next) throw GraphError("band " + std::to_string(b) + " does not start where the previous ends");
    next += g.bands[b].size();
  }
  if (next != n) throw GraphError("bands cover " + std::to_string(next) + " nodes, graph has " + std::to_string(n));
}

std::vector<std::size_t> node_permutation(const NeuralGraph& g, const zoo::NeuronPermutation& p) {
  std::vector<std::size_t> perm(g.num_nodes);
  for (const Band& b : g.bands) {
    if (b.group >= p.groups.size()) throw GraphError("permutation lacks neuron group " + std::to_string(b.group));
    const auto& pg = p.groups[b.group];
    if (pg.size() != b.channels)
      throw GraphError("permutation group " + std::to_string(b.group) + " has size " + std::to_string(pg.size()) +
                       ", band has " + std::to_string(b.channels) + " channels");
    for (std::size_t c = 0; c < b.channels; ++c)
      for (std::size_t s = 0; s < b.spatial; ++s) perm[b.first + c * b.spatial + s] = b.first + pg[c] * b.spatial + s;
  }
  return perm;
}

NeuralGraph permute_graph(const NeuralGraph& g, const std::vector<std::size_t>& perm) {
  if (perm.size() != g.num_nodes || !zoo::is_permutation(perm))
    throw GraphError("node permutation of size " + std::to_string(perm.size()) + " is invalid for " +
                     std::to_string(g.num_nodes) + " nodes");
  NeuralGraph out = g;
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    std::size_t j = perm[i];
    std::copy_n(g.node_features.begin() + j * g.node_dim, g.node_dim, out.node_features.begin() + i * g.node_dim);
    out.node_band[i] = g.node_band[j];
    out.node_spatial[i] = g.node_spatial[j];
    out.node_role[i] = g.node_role[j];
    out.node_activation[i] = g.node_activation[j];
    out.node_position[i] = g.node_position[j];
  }
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    out.edge_src[e] = inv[g.edge_src[e]];
    out.edge_dst[e] = inv[g.edge_dst[e]];
  }
  sort_edges(out);
  return out;
}

std::vector<double> dense_edges(const NeuralGraph& g) {
  std::size_t n = g.num_nodes, d = g.edge_dim;
  std::vector<double> dense(n * n * d, 0.0);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    auto row = g.edge_row(e);
    double* dst = dense.data() + (g.edge_src[e] * n + g.edge_dst[e]) * d;
    for (std::size_t k = 0; k < d; ++k) dst[k] += row[k];
  }
  return dense;
}

}  // namespace ngraph::graph
