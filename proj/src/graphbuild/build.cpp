#include "ngraph/graphbuild/build.hpp"

#include <algorithm>
#include <unordered_map>

namespace ngraph::graph {

using zoo::Checkpoint;
using zoo::KernelSize;
using zoo::LayerSpec;

namespace {

std::string kernel_str(KernelSize k) { return std::to_string(k.width) + "x" + std::to_string(k.height); }

bool followed_by_flatten(const std::vector<LayerSpec>& spec, std::size_t i) {
  return i + 1 < spec.size() && spec[i + 1].kind == LayerKind::flatten;
}

GraphLayout make_layout(const Checkpoint& net, const GraphOptions& opts) {
  GraphLayout lay;
  lay.linear_mode = opts.linear_mode;
  lay.flatten_mode = opts.flatten_mode;
  bool has_flatten = std::any_of(net.spec.begin(), net.spec.end(),
                                 [](const LayerSpec& s) { return s.kind == LayerKind::flatten; });
  if (has_flatten && opts.flatten_mode == FlattenMode::adaptive)
    throw GraphError("network has a flatten layer; use flatten mode repeat-nodes or virtual-layer");
  if (!has_flatten && opts.flatten_mode != FlattenMode::adaptive)
    throw GraphError("flatten mode " + std::string(to_string(opts.flatten_mode)) +
                     " needs a flatten layer followed by a linear head");

  if (net.has_attention()) {
    if (net.has_conv()) throw GraphError("attention and conv2d layers cannot share one graph");
    lay.base_edge_dim = 3;
    lay.scalar_slot = 2;
    lay.linear_slot = 2;
    return lay;
  }
  KernelSize window{1, 1};
  for (const LayerSpec& s : net.spec)
    if (s.kernel) window = {std::max(window.width, s.kernel->width), std::max(window.height, s.kernel->height)};
  if (opts.max_kernel) {
    for (const LayerSpec& s : net.spec)
      if (s.kernel && (s.kernel->width > opts.max_kernel->width || s.kernel->height > opts.max_kernel->height))
        throw GraphError("kernel " + kernel_str(*s.kernel) + " is larger than max-kernel " + kernel_str(*opts.max_kernel));
    window = *opts.max_kernel;
  }
  lay.window_width = window.width;
  lay.window_height = window.height;
  lay.base_edge_dim = window.width * window.height;
  lay.scalar_slot = ((window.height - 1) / 2) * window.width + (window.width - 1) / 2;
  lay.linear_slot = opts.linear_mode == LinearMode::as_mlp ? 0 : lay.scalar_slot;
  return lay;
}

struct Builder {
  NeuralGraph& g;
  std::vector<double> feat;

  explicit Builder(NeuralGraph& graph) : g(graph), feat(graph.edge_dim, 0.0) {}

  std::size_t add_band(BandKind kind, std::size_t layer, std::size_t group, std::size_t channels, std::size_t spatial,
                       Activation act, std::span<const double> bias) {
    Band b{kind, layer, group, g.num_nodes, channels, spatial};
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t s = 0; s < spatial; ++s) {
        g.node_features.push_back(bias.empty() ? 0.0 : bias[c]);
        g.node_band.push_back(g.bands.size());
        g.node_index.push_back(c);
        g.node_spatial.push_back(s);
        g.node_role.push_back(IoRole::hidden);
        g.node_activation.push_back(act);
        g.node_position.push_back(0);
      }
    g.num_nodes += b.size();
    g.bands.push_back(b);
    return g.bands.size() - 1;
  }

  void scalar_edge(std::size_t src, std::size_t dst, std::size_t slot, double w, EdgeKind kind = EdgeKind::weight) {
    std::fill(feat.begin(), feat.end(), 0.0);
    feat[slot] = w;
    push_edge(g, src, dst, kind, false, feat);
  }
};

void assign_roles_and_positions(NeuralGraph& g) {
  const Band& in = g.bands.front();
  const Band& out = g.bands.back();
  std::size_t next = in.size() + out.size();
  for (std::size_t b = 0; b < g.bands.size(); ++b) {
    const Band& band = g.bands[b];
    for (std::size_t k = 0; k < band.size(); ++k) {
      std::size_t node = band.first + k;
      if (b == 0) {
        g.node_role[node] = IoRole::input;
        g.node_position[node] = k;
      } else if (b + 1 == g.bands.size()) {
        g.node_role[node] = IoRole::output;
        g.node_position[node] = in.size() + k;
      } else {
        g.node_position[node] = next + g.node_spatial[node];
      }
    }
    if (b != 0 && b + 1 != g.bands.size()) next += band.spatial;
  }
}

}  // namespace

std::size_t kernel_offset(std::size_t window, std::size_t k) { return (window - 1) / 2 - (k - 1) / 2; }

std::size_t band_of_layer(const NeuralGraph& g, std::size_t layer) {
  std::size_t best = 0;
  for (std::size_t b = 0; b < g.bands.size(); ++b)
    if (g.bands[b].layer <= layer && g.bands[b].kind != BandKind::heads) best = b;
  return best;
}

NeuralGraph build_graph(const Checkpoint& net, const GraphOptions& opts) {
  zoo::validate(net);
  NeuralGraph g;
  g.layout = make_layout(net, opts);
  g.edge_dim = g.layout.base_edge_dim;
  g.spec = net.spec;
  g.metadata = net.metadata;
  const GraphLayout& lay = g.layout;
  auto groups = zoo::neuron_groups(net);
  Builder bld(g);

  bld.add_band(BandKind::input, 0, 0, net.input_dim(), 1, Activation::identity, {});
  std::vector<std::size_t> layer_band(net.spec.size() + 1, 0);  // band holding each layer's output

  for (std::size_t i = 0; i < net.spec.size(); ++i) {
    const LayerSpec& s = net.spec[i];
    const auto& p = net.params[i];
    std::size_t l = i + 1;
    std::size_t out_group = zoo::output_group_of_layer(groups, l);
    const Band src = g.bands[layer_band[l - 1]];
    switch (s.kind) {
      case LayerKind::linear: {
        std::size_t b = bld.add_band(BandKind::layer, l, out_group, s.out_dim, 1, s.activation, p.bias);
        const Band dst = g.bands[b];
        if (src.size() != s.in_dim)
          throw GraphError("layer " + std::to_string(l) + ": linear input width " + std::to_string(s.in_dim) +
                           " does not match " + std::to_string(src.size()) + " source nodes");
        for (std::size_t o = 0; o < s.out_dim; ++o)
          for (std::size_t j = 0; j < s.in_dim; ++j)
            bld.scalar_edge(src.first + j, dst.first + o, lay.linear_slot, p.weight[o * s.in_dim + j]);
        layer_band[l] = b;
        break;
      }
      case LayerKind::conv2d: {
        std::size_t spatial = 1;
        if (lay.flatten_mode == FlattenMode::repeat_nodes && followed_by_flatten(net.spec, i))
          spatial = net.spec[i + 1].spatial_height * net.spec[i + 1].spatial_width;
        std::size_t b = bld.add_band(BandKind::layer, l, out_group, s.out_dim, spatial, s.activation, p.bias);
        const Band dst = g.bands[b];
        std::size_t kh = s.kernel->height, kw = s.kernel->width;
        std::size_t oh = kernel_offset(lay.window_height, kh), ow = kernel_offset(lay.window_width, kw);
        for (std::size_t o = 0; o < s.out_dim; ++o)
          for (std::size_t c = 0; c < s.in_dim; ++c) {
            std::fill(bld.feat.begin(), bld.feat.end(), 0.0);
            for (std::size_t a = 0; a < kh; ++a)
              for (std::size_t bb = 0; bb < kw; ++bb)
                bld.feat[(oh + a) * lay.window_width + ow + bb] = p.weight[((o * s.in_dim + c) * kh + a) * kw + bb];
            for (std::size_t sp = 0; sp < spatial; ++sp)
              push_edge(g, src.first + c, dst.first + o * spatial + sp, EdgeKind::weight, false, bld.feat);
          }
        layer_band[l] = b;
        break;
      }
      case LayerKind::norm: {
        std::size_t b = bld.add_band(BandKind::layer, l, out_group, s.out_dim, 1, s.activation, p.bias);
        const Band dst = g.bands[b];
        for (std::size_t k = 0; k < s.out_dim; ++k) bld.scalar_edge(src.first + k, dst.first + k, lay.scalar_slot, p.weight[k]);
        layer_band[l] = b;
        break;
      }
      case LayerKind::attention: {
        std::size_t hd = s.heads * s.head_dim;
        std::size_t heads_group = 0;
        for (std::size_t k = 0; k < groups.size(); ++k)
          if (groups[k].layer == l && groups[k].attention_heads) heads_group = k;
        std::size_t hb = bld.add_band(BandKind::heads, l, heads_group, hd, 1, Activation::identity, {});
        std::size_t ob = bld.add_band(BandKind::layer, l, out_group, s.out_dim, 1, s.activation, p.bias);
        const Band heads = g.bands[hb], out = g.bands[ob];
        for (std::size_t r = 0; r < hd; ++r)
          for (std::size_t c = 0; c < s.in_dim; ++c) {
            std::size_t k = r * s.in_dim + c;
            bld.feat = {p.query[k], p.key[k], p.value[k]};
            push_edge(g, src.first + c, heads.first + r, EdgeKind::weight, false, bld.feat);
          }
        for (std::size_t o = 0; o < s.out_dim; ++o)
          for (std::size_t r = 0; r < hd; ++r) bld.scalar_edge(heads.first + r, out.first + o, lay.scalar_slot, p.weight[o * hd + r]);
        layer_band[l] = ob;
        break;
      }
      case LayerKind::flatten: {
        if (lay.flatten_mode == FlattenMode::virtual_layer) {
          std::size_t spatial = s.spatial_height * s.spatial_width;
          std::size_t b = bld.add_band(BandKind::virtual_layer, l, src.group, s.in_dim, spatial, Activation::identity, {});
          const Band dst = g.bands[b];
          for (std::size_t c = 0; c < s.in_dim; ++c)
            for (std::size_t sp = 0; sp < spatial; ++sp)
              bld.scalar_edge(src.first + c, dst.first + c * spatial + sp, lay.scalar_slot, 1.0, EdgeKind::virtual_link);
          layer_band[l] = b;
        } else {
          layer_band[l] = layer_band[l - 1];
        }
        break;
      }
    }
  }
  assign_roles_and_positions(g);
  sort_edges(g);
  return g;
}

NeuralGraph add_residual_edges(const NeuralGraph& g, const Checkpoint& net) {
  if (g.spec != net.spec) throw GraphError("graph was not built from this network");
  if (std::find(g.edge_kind.begin(), g.edge_kind.end(), EdgeKind::residual) != g.edge_kind.end())
    throw GraphError("residual edges are already present");
  if (g.layout.direction) throw GraphError("add residual edges before attaching direction features");
  NeuralGraph out = g;
  std::vector<double> feat(out.edge_dim, 0.0);
  feat[out.layout.scalar_slot] = 1.0;
  for (std::size_t i = 0; i < net.spec.size(); ++i) {
    if (!net.spec[i].residual_source) continue;
    const Band& src = out.bands[band_of_layer(out, *net.spec[i].residual_source)];
    const Band& dst = out.bands[band_of_layer(out, i + 1)];
    std::size_t m = std::min(src.channels, dst.channels);
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t sp = 0; sp < dst.spatial; ++sp)
        push_edge(out, src.first + k * src.spatial, dst.first + k * dst.spatial + sp, EdgeKind::residual, false, feat);
  }
  sort_edges(out);
  return out;
}

NeuralGraph to_graph(const Checkpoint& net, const GraphOptions& opts) {
  NeuralGraph g = build_graph(net, opts);
  return opts.residual_edges ? add_residual_edges(g, net) : g;
}

NeuralGraph mlp_to_graph(const Checkpoint& net) {
  for (const LayerSpec& s : net.spec)
    if (s.kind == LayerKind::conv2d || s.kind == LayerKind::flatten)
      throw GraphError("network has conv2d layers; use cnn_to_graph");
    else if (s.kind == LayerKind::attention)
      throw GraphError("network has attention layers; use transformer_to_graph");
  GraphOptions opts;
  opts.max_kernel = KernelSize{1, 1};
  return build_graph(net, opts);
}

NeuralGraph cnn_to_graph(const Checkpoint& net, KernelSize max_kernel, LinearMode linear_mode, FlattenMode flatten_mode) {
  GraphOptions opts;
  opts.max_kernel = max_kernel;
  opts.linear_mode = linear_mode;
  opts.flatten_mode = flatten_mode;
  return build_graph(net, opts);
}

NeuralGraph transformer_to_graph(const Checkpoint& net) {
  if (net.spec.empty() || net.spec.front().kind != LayerKind::attention)
    throw GraphError("transformer_to_graph expects a network starting with an attention layer");
  return build_graph(net, {});
}

NeuralGraph norm_to_graph(std::span<const double> gamma, std::span<const double> beta, KernelSize window) {
  if (gamma.size() != beta.size())
    throw GraphError("norm scale has " + std::to_string(gamma.size()) + " entries, shift has " + std::to_string(beta.size()));
  Checkpoint net;
  net.spec = {zoo::norm_layer(gamma.size())};
  zoo::LayerParams p;
  p.weight.assign(gamma.begin(), gamma.end());
  p.bias.assign(beta.begin(), beta.end());
  net.params = {p};
  GraphOptions opts;
  opts.max_kernel = window;
  return build_graph(net, opts);
}

namespace {

class EdgeLookup {
public:
  explicit EdgeLookup(const NeuralGraph& g) : g_(g) {
    for (std::size_t e = 0; e < g.num_edges(); ++e)
      if (!g.edge_backward[e] && g.edge_kind[e] == EdgeKind::weight) {
        index_[g.edge_src[e] * g.num_nodes + g.edge_dst[e]] = e;
      }
  }

  std::span<const double> at(std::size_t src, std::size_t dst) const {
    auto it = index_.find(src * g_.num_nodes + dst);
    if (it == index_.end())
      throw GraphError("missing weight edge " + std::to_string(src) + " -> " + std::to_string(dst));
    ++used_;
    return g_.edge_row(it->second).first(g_.layout.base_edge_dim);
  }

  std::size_t size() const { return index_.size(); }
  std::size_t used() const { return used_; }

private:
  const NeuralGraph& g_;
  std::unordered_map<std::size_t, std::size_t> index_;
  mutable std::size_t used_ = 0;
};

double only_slot(std::span<const double> f, std::size_t slot) {
  for (std::size_t k = 0; k < f.size(); ++k)
    if (k != slot && f[k] != 0.0) throw GraphError("scalar edge has a nonzero entry outside its slot");
  return f[slot];
}

}  // namespace

Checkpoint graph_to_network(const NeuralGraph& g) {
  check_graph(g);
  if (g.layout.normalized) throw GraphError("graph features are normalized; the source network cannot be recovered exactly");
  Checkpoint net;
  net.spec = g.spec;
  net.metadata = g.metadata;
  try {
    zoo::validate_spec(net.spec);
  } catch (const zoo::CheckpointError& e) {
    throw GraphError(std::string("graph carries an invalid architecture: ") + e.what());
  }
  const GraphLayout& lay = g.layout;
  EdgeLookup edges(g);
  auto bias_of = [&](const Band& b) {
    std::vector<double> bias(b.channels);
    for (std::size_t c = 0; c < b.channels; ++c) bias[c] = g.node_row(b.first + c * b.spatial)[0];
    return bias;
  };

  for (std::size_t i = 0; i < net.spec.size(); ++i) {
    const LayerSpec& s = net.spec[i];
    std::size_t l = i + 1;
    zoo::LayerParams p;
    const Band& src = g.bands[band_of_layer(g, l - 1)];
    const Band& dst = g.bands[band_of_layer(g, l)];
    switch (s.kind) {
      case LayerKind::linear:
        p.bias = bias_of(dst);
        for (std::size_t o = 0; o < s.out_dim; ++o)
          for (std::size_t j = 0; j < s.in_dim; ++j)
            p.weight.push_back(only_slot(edges.at(src.first + j, dst.first + o), lay.linear_slot));
        break;
      case LayerKind::conv2d: {
        p.bias = bias_of(dst);
        std::size_t kh = s.kernel->height, kw = s.kernel->width;
        std::size_t oh = kernel_offset(lay.window_height, kh), ow = kernel_offset(lay.window_width, kw);
        p.weight.resize(s.out_dim * s.in_dim * kh * kw);
        for (std::size_t o = 0; o < s.out_dim; ++o)
          for (std::size_t c = 0; c < s.in_dim; ++c) {
            auto f = edges.at(src.first + c, dst.first + o * dst.spatial);
            for (std::size_t sp = 1; sp < dst.spatial; ++sp) {
              auto copy = edges.at(src.first + c, dst.first + o * dst.spatial + sp);
              if (!std::equal(f.begin(), f.end(), copy.begin())) throw GraphError("repeated node copies disagree");
            }
            for (std::size_t r = 0; r < lay.window_height; ++r)
              for (std::size_t q = 0; q < lay.window_width; ++q) {
                double v = f[r * lay.window_width + q];
                bool inside = r >= oh && r < oh + kh && q >= ow && q < ow + kw;
                if (inside)
                  p.weight[((o * s.in_dim + c) * kh + (r - oh)) * kw + (q - ow)] = v;
                else if (v != 0.0)
                  throw GraphError("kernel padding of layer " + std::to_string(l) + " is not zero");
              }
          }
        break;
      }
      case LayerKind::norm:
        p.bias = bias_of(dst);
        for (std::size_t k = 0; k < s.out_dim; ++k)
          p.weight.push_back(only_slot(edges.at(src.first + k, dst.first + k), lay.scalar_slot));
        break;
      case LayerKind::attention: {
        const Band& heads = g.bands[band_of_layer(g, l) - 1];
        if (heads.kind != BandKind::heads) throw GraphError("attention layer without a head band");
        std::size_t hd = s.heads * s.head_dim;
        for (std::size_t r = 0; r < hd; ++r)
          for (std::size_t c = 0; c < s.in_dim; ++c) {
            auto f = edges.at(src.first + c, heads.first + r);
            p.query.push_back(f[0]);
            p.key.push_back(f[1]);
            p.value.push_back(f[2]);
          }
        for (std::size_t o = 0; o < s.out_dim; ++o)
          for (std::size_t r = 0; r < hd; ++r)
            p.weight.push_back(only_slot(edges.at(heads.first + r, dst.first + o), lay.scalar_slot));
        p.bias = bias_of(dst);
        break;
      }
      case LayerKind::flatten:
        break;
    }
    net.params.push_back(std::move(p));
  }
  if (edges.used() != edges.size())
    throw GraphError("graph has " + std::to_string(edges.size() - edges.used()) + " weight edges not produced by the network");
  try {
    zoo::validate(net);
  } catch (const zoo::CheckpointError& e) {
    throw GraphError(std::string("recovered network is inconsistent: ") + e.what());
  }
  return net;
}

}  // namespace ngraph::graph
