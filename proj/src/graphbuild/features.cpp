#include "ngraph/graphbuild/features.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ngraph/graphbuild/build.hpp"
#include "ngraph/netzoo/network.hpp"

namespace ngraph::graph {

using ad::Tensor;

namespace {

constexpr double kMinStd = 1e-6;

NeuralGraph append_node_channels(const NeuralGraph& g, std::size_t extra,
                                 const std::function<void(std::size_t, std::span<double>)>& fill) {
  NeuralGraph out = g;
  out.node_dim = g.node_dim + extra;
  out.node_features.assign(g.num_nodes * out.node_dim, 0.0);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    auto row = g.node_row(i);
    std::copy(row.begin(), row.end(), out.node_features.begin() + i * out.node_dim);
    fill(i, std::span<double>(out.node_features.data() + i * out.node_dim + g.node_dim, extra));
  }
  return out;
}

std::vector<double> random_rows(std::size_t count, ad::Rng& rng) {
  std::vector<double> v(count);
  for (auto& x : v) x = rng.normal(0.0, 1.0);
  return v;
}

}  // namespace

ActivationTable make_activation_table(std::size_t dim, ad::Rng& rng) {
  return {dim, random_rows(zoo::kNumActivations * dim, rng)};
}

NeuralGraph attach_activation_embeddings(const NeuralGraph& g, const ActivationTable& table) {
  if (table.rows.size() != zoo::kNumActivations * table.dim) throw GraphError("activation table has the wrong size");
  NeuralGraph out = append_node_channels(g, table.dim, [&](std::size_t i, std::span<double> dst) {
    std::size_t a = static_cast<std::size_t>(g.node_activation[i]);
    std::copy_n(table.rows.begin() + a * table.dim, table.dim, dst.begin());
  });
  out.layout.activation_channels += table.dim;
  return out;
}

PositionalEmbeddings make_positional_embeddings(std::size_t slots, std::size_t dim, ad::Rng& rng) {
  return {dim, slots, random_rows(slots * dim, rng)};
}

NeuralGraph attach_positional_embeddings(const NeuralGraph& g, const PositionalEmbeddings& pe) {
  if (pe.rows.size() != pe.slots * pe.dim) throw GraphError("positional table has the wrong size");
  if (g.num_position_slots() > pe.slots)
    throw GraphError("graph needs " + std::to_string(g.num_position_slots()) + " positional slots, table has " +
                     std::to_string(pe.slots));
  NeuralGraph out = append_node_channels(g, pe.dim, [&](std::size_t i, std::span<double> dst) {
    std::copy_n(pe.rows.begin() + g.node_position[i] * pe.dim, pe.dim, dst.begin());
  });
  out.layout.position_channels += pe.dim;
  return out;
}

NeuralGraph attach_direction_features(const NeuralGraph& g, bool undirected) {
  if (g.layout.direction) throw GraphError("direction features are already attached");
  std::size_t d = g.edge_dim;
  std::size_t blocks = undirected ? 3 : 2;
  NeuralGraph out = g;
  out.edge_dim = d * blocks;
  out.edge_src.clear();
  out.edge_dst.clear();
  out.edge_kind.clear();
  out.edge_backward.clear();
  out.edge_features.clear();
  std::vector<double> feat(out.edge_dim);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    auto f = g.edge_row(e);
    std::fill(feat.begin(), feat.end(), 0.0);
    std::copy(f.begin(), f.end(), feat.begin());
    if (undirected) std::copy(f.begin(), f.end(), feat.begin() + 2 * d);
    push_edge(out, g.edge_src[e], g.edge_dst[e], g.edge_kind[e], false, feat);
    std::fill(feat.begin(), feat.begin() + d, 0.0);
    std::copy(f.begin(), f.end(), feat.begin() + d);
    push_edge(out, g.edge_dst[e], g.edge_src[e], g.edge_kind[e], true, feat);
  }
  out.layout.direction = true;
  out.layout.undirected = undirected;
  sort_edges(out);
  return out;
}

std::size_t stat_channels(const NeuralGraph& g) {
  bool attention = std::any_of(g.bands.begin(), g.bands.end(), [](const Band& b) { return b.kind == BandKind::heads; });
  return attention ? g.layout.base_edge_dim : 1;
}

std::vector<int> real_slots(const NeuralGraph& g, std::size_t e) {
  const GraphLayout& lay = g.layout;
  std::vector<int> slots(lay.base_edge_dim, -1);
  bool per_slot = stat_channels(g) > 1;
  auto mark = [&](std::size_t slot) { slots[slot] = per_slot ? static_cast<int>(slot) : 0; };
  if (g.edge_kind[e] != EdgeKind::weight) {
    mark(lay.scalar_slot);
    return slots;
  }
  const Band& band = g.bands[g.node_band[g.edge_backward[e] ? g.edge_src[e] : g.edge_dst[e]]];
  if (band.kind == BandKind::heads) {
    for (std::size_t k = 0; k < 3; ++k) mark(k);
    return slots;
  }
  const zoo::LayerSpec& s = g.spec.at(band.layer - 1);
  switch (s.kind) {
    case LayerKind::conv2d: {
      std::size_t kh = s.kernel->height, kw = s.kernel->width;
      std::size_t oh = kernel_offset(lay.window_height, kh), ow = kernel_offset(lay.window_width, kw);
      for (std::size_t a = 0; a < kh; ++a)
        for (std::size_t b = 0; b < kw; ++b) mark((oh + a) * lay.window_width + ow + b);
      break;
    }
    case LayerKind::linear: mark(lay.linear_slot); break;
    default: mark(lay.scalar_slot); break;
  }
  return slots;
}

std::vector<BandStats> layerwise_stats(std::span<const NeuralGraph> graphs) {
  if (graphs.empty()) throw GraphError("layerwise normalization needs at least one graph");
  std::size_t nb = 0, ch = stat_channels(graphs.front());
  for (const auto& g : graphs) {
    if (g.layout.direction) throw GraphError("normalize before attaching direction features");
    if (stat_channels(g) != ch) throw GraphError("graphs mix attention and non-attention layouts");
    nb = std::max(nb, g.bands.size());
  }
  // sums per band: weights per channel, biases
  std::vector<std::vector<double>> ws(nb, std::vector<double>(ch, 0.0)), ws2 = ws, wn = ws;
  std::vector<double> bs(nb, 0.0), bs2(nb, 0.0), bn(nb, 0.0);
  for (const auto& g : graphs) {
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
      if (g.edge_kind[e] != EdgeKind::weight) continue;
      std::size_t b = g.node_band[g.edge_dst[e]];
      auto slots = real_slots(g, e);
      auto f = g.edge_row(e);
      for (std::size_t k = 0; k < slots.size(); ++k)
        if (slots[k] >= 0) {
          auto c = static_cast<std::size_t>(slots[k]);
          ws[b][c] += f[k];
          ws2[b][c] += f[k] * f[k];
          wn[b][c] += 1.0;
        }
    }
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
      std::size_t b = g.node_band[i];
      double v = g.node_row(i)[0];
      bs[b] += v;
      bs2[b] += v * v;
      bn[b] += 1.0;
    }
  }
  auto finish = [](double s, double s2, double n, double& mean, double& std) {
    mean = n > 0 ? s / n : 0.0;
    double var = n > 0 ? std::max(0.0, s2 / n - mean * mean) : 0.0;
    std = std::max(std::sqrt(var), kMinStd);
  };
  std::vector<BandStats> stats(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    stats[b].weight_mean.resize(ch);
    stats[b].weight_std.resize(ch);
    for (std::size_t c = 0; c < ch; ++c) finish(ws[b][c], ws2[b][c], wn[b][c], stats[b].weight_mean[c], stats[b].weight_std[c]);
    finish(bs[b], bs2[b], bn[b], stats[b].bias_mean, stats[b].bias_std);
  }
  return stats;
}

NeuralGraph apply_layerwise_normalization(const NeuralGraph& g, const std::vector<BandStats>& stats) {
  if (g.layout.direction) throw GraphError("normalize before attaching direction features");
  if (g.layout.normalized) throw GraphError("graph is already normalized");
  if (stats.size() < g.bands.size()) throw GraphError("statistics cover fewer bands than the graph has");
  NeuralGraph out = g;
  for (std::size_t e = 0; e < out.num_edges(); ++e) {
    if (out.edge_kind[e] != EdgeKind::weight) continue;
    const BandStats& st = stats[out.node_band[out.edge_dst[e]]];
    auto slots = real_slots(out, e);
    auto f = out.edge_row(e);
    for (std::size_t k = 0; k < slots.size(); ++k)
      if (slots[k] >= 0) {
        auto c = static_cast<std::size_t>(slots[k]);
        f[k] = (f[k] - st.weight_mean[c]) / st.weight_std[c];
      }
  }
  for (std::size_t i = 0; i < out.num_nodes; ++i) {
    const BandStats& st = stats[out.node_band[i]];
    double& v = out.node_features[i * out.node_dim];
    v = (v - st.bias_mean) / st.bias_std;
  }
  out.stats.assign(stats.begin(), stats.begin() + static_cast<std::ptrdiff_t>(g.bands.size()));
  out.layout.normalized = true;
  return out;
}

std::pair<std::vector<NeuralGraph>, std::vector<BandStats>> normalize_layerwise(std::span<const NeuralGraph> graphs) {
  auto stats = layerwise_stats(graphs);
  std::vector<NeuralGraph> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(apply_layerwise_normalization(g, stats));
  return {std::move(out), std::move(stats)};
}

NeuralGraph denormalize(const NeuralGraph& g) {
  if (!g.layout.normalized) return g;
  NeuralGraph out = g;
  for (std::size_t e = 0; e < out.num_edges(); ++e) {
    if (out.edge_kind[e] != EdgeKind::weight) continue;
    const BandStats& st = g.stats[out.node_band[out.edge_backward[e] ? out.edge_src[e] : out.edge_dst[e]]];
    auto slots = real_slots(out, e);
    auto f = out.edge_row(e);
    std::size_t block = out.edge_backward[e] ? out.layout.base_edge_dim : 0;
    for (std::size_t k = 0; k < slots.size(); ++k)
      if (slots[k] >= 0) {
        auto c = static_cast<std::size_t>(slots[k]);
        f[block + k] = f[block + k] * st.weight_std[c] + st.weight_mean[c];
        if (out.layout.undirected) f[2 * out.layout.base_edge_dim + k] = f[block + k];
      }
  }
  for (std::size_t i = 0; i < out.num_nodes; ++i) {
    const BandStats& st = g.stats[out.node_band[i]];
    double& v = out.node_features[i * out.node_dim];
    v = v * st.bias_std + st.bias_mean;
  }
  out.stats.clear();
  out.layout.normalized = false;
  return out;
}

zoo::Checkpoint probe_network(const NeuralGraph& g) {
  for (const auto& s : g.spec)
    if (s.kind != LayerKind::linear && s.kind != LayerKind::norm)
      throw GraphError("probe features need a network of linear and norm layers");
  NeuralGraph raw = denormalize(g);
  if (raw.layout.direction) {
    // keep forward copies, first block only
    NeuralGraph fwd = raw;
    fwd.edge_src.clear();
    fwd.edge_dst.clear();
    fwd.edge_kind.clear();
    fwd.edge_backward.clear();
    fwd.edge_features.clear();
    fwd.edge_dim = raw.layout.base_edge_dim;
    for (std::size_t e = 0; e < raw.num_edges(); ++e)
      if (!raw.edge_backward[e])
        push_edge(fwd, raw.edge_src[e], raw.edge_dst[e], raw.edge_kind[e], false,
                  raw.edge_row(e).first(raw.layout.base_edge_dim));
    fwd.layout.direction = false;
    fwd.layout.undirected = false;
    raw = std::move(fwd);
  }
  // extra node channels do not affect the weights
  std::vector<double> bias(raw.num_nodes);
  for (std::size_t i = 0; i < raw.num_nodes; ++i) bias[i] = raw.node_row(i)[0];
  raw.node_features = std::move(bias);
  raw.node_dim = 1;
  raw.layout.probe_channels = raw.layout.activation_channels = raw.layout.position_channels = 0;
  return graph_to_network(raw);
}

Tensor probe_values(const zoo::Checkpoint& net, const Tensor& probes) {
  if (probes.rank() != 2 || probes.dim(1) != net.input_dim())
    throw GraphError("probes must be [M, " + std::to_string(net.input_dim()) + "], got " + ad::shape_str(probes.shape()));
  auto outputs = zoo::forward_all(net.spec, zoo::make_tensors(net, false), probes);
  std::vector<Tensor> rows;
  for (const auto& o : outputs) rows.push_back(ad::transpose(o));
  return ad::concat_rows(rows);
}

Tensor probe_values(const NeuralGraph& g, const Tensor& probes) { return probe_values(probe_network(g), probes); }

NeuralGraph attach_probe_features(const NeuralGraph& g, const Tensor& probes) {
  std::size_t m = probes.rank() == 2 ? probes.dim(0) : 0;
  if (m == 0) return g;
  Tensor vals = probe_values(g, probes);
  NeuralGraph out = append_node_channels(g, m, [&](std::size_t i, std::span<double> dst) {
    for (std::size_t k = 0; k < m; ++k) dst[k] = vals.data()[i * m + k];
  });
  out.layout.probe_channels += m;
  return out;
}

Tensor make_probes(std::size_t count, std::size_t input_dim, ad::Rng& rng, bool trainable) {
  std::vector<double> v(count * input_dim);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from({count, input_dim}, std::move(v), trainable);
}

}  // namespace ngraph::graph
