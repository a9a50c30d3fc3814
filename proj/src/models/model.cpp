#include "ngraph/models/model.hpp"

#include <array>
#include <cmath>

#include "ngraph/graphbuild/features.hpp"
#include "ngraph/util/json_fields.hpp"

namespace ngraph::models {

using ad::Tensor;
using util::FormatError;
using util::Json;

namespace {

constexpr std::array<std::pair<ModelKind, std::string_view>, 2> kKinds{{{ModelKind::gnn, "gnn"}, {ModelKind::ngt, "ngt"}}};
constexpr std::array<std::pair<Readout, std::string_view>, 4> kReadouts{{{Readout::invariant, "invariant"},
                                                                         {Readout::per_node, "per-node"},
                                                                         {Readout::per_edge, "per-edge"},
                                                                         {Readout::per_parameter, "per-parameter"}}};

Tensor lin(const ParamStore& p, const std::string& name, const Tensor& x) {
  Tensor y = ad::matmul(x, p.get(name + ".w"));
  if (p.contains(name + ".b")) y = y + p.get(name + ".b");
  return y;
}

Tensor norm(const ParamStore& p, const std::string& name, const Tensor& x) {
  return ad::layer_norm_rows(x) * p.get(name + ".g") + p.get(name + ".b");
}

Tensor cat(std::initializer_list<Tensor> parts) {
  std::vector<Tensor> v(parts);
  return ad::concat_cols(v);
}

Tensor drop(const Tensor& x, double rate, const RunOptions& run) {
  if (!run.training || rate <= 0.0) return x;
  if (!run.rng) throw ModelError("dropout in training mode needs a random generator");
  return ad::dropout(x, rate, *run.rng);
}

void add_norm(ParamStore& p, const std::string& name, std::size_t width) {
  p.add(name + ".g", {width}, std::vector<double>(width, 1.0));
  p.add(name + ".b", {width}, std::vector<double>(width, 0.0));
}

/// [width, heads] block indicator: column h sums the dimensions of head h.
Tensor head_blocks(std::size_t width, std::size_t heads) {
  std::size_t dh = width / heads;
  std::vector<double> m(width * heads, 0.0);
  for (std::size_t c = 0; c < width; ++c) m[c * heads + c / dh] = 1.0;
  return Tensor::from({width, heads}, std::move(m));
}

std::string layer_prefix(const char* kind, std::size_t k) { return std::string(kind) + "." + std::to_string(k) + "."; }

}  // namespace

std::string_view to_string(ModelKind k) {
  for (auto& [v, n] : kKinds)
    if (v == k) return n;
  return "?";
}

std::string_view to_string(Readout r) {
  for (auto& [v, n] : kReadouts)
    if (v == r) return n;
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  for (auto& [v, n] : kKinds)
    if (n == s) return v;
  throw ModelError("unknown model kind '" + std::string(s) + "' (expected gnn or ngt)");
}

Readout parse_readout(std::string_view s) {
  for (auto& [v, n] : kReadouts)
    if (n == s) return v;
  throw ModelError("unknown readout '" + std::string(s) + "' (expected invariant, per-node, per-edge or per-parameter)");
}

void validate(const ModelConfig& c) {
  if (c.layers == 0) throw ModelError("model needs at least one layer");
  if (c.node_width == 0 || c.edge_width == 0 || c.head_width == 0 || c.out_dim == 0)
    throw ModelError("model widths must be positive");
  if (c.kind == ModelKind::ngt && (c.heads == 0 || c.node_width % c.heads != 0))
    throw ModelError("node width " + std::to_string(c.node_width) + " is not divisible by " + std::to_string(c.heads) +
                     " heads");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ModelError("dropout rate must lie in [0, 1)");
  if (c.position_dim > 0 && c.position_slots == 0) throw ModelError("positional table needs at least one slot");
}

BatchOptions batch_options(const ModelConfig& cfg) {
  BatchOptions o;
  o.pairs = cfg.kind == ModelKind::ngt;
  o.probe_nets = cfg.probes > 0;
  return o;
}

Model init_model(const ModelConfig& cfg, const InputDims& dims, ad::Rng& rng) {
  validate(cfg);
  if (cfg.probes > 0 && dims.probe_input == 0) throw ModelError("probe features need the source input width");
  Model m{cfg, dims, {}};
  ParamStore& p = m.params;
  std::size_t h = cfg.node_width, he = cfg.edge_width;

  std::size_t node_in = dims.node_features + cfg.activation_dim + cfg.position_dim + cfg.probes;
  if (cfg.activation_dim > 0) {
    std::vector<double> t(zoo::kNumActivations * cfg.activation_dim);
    for (auto& x : t) x = rng.normal(0.0, 1.0);
    p.add("emb.activation", {zoo::kNumActivations, cfg.activation_dim}, std::move(t));
  }
  if (cfg.position_dim > 0) {
    std::vector<double> t(cfg.position_slots * cfg.position_dim);
    for (auto& x : t) x = rng.normal(0.0, 1.0);
    p.add("emb.position", {cfg.position_slots, cfg.position_dim}, std::move(t));
  }
  if (cfg.probes > 0) {
    std::vector<double> t(cfg.probes * dims.probe_input);
    for (auto& x : t) x = rng.uniform(-1.0, 1.0);
    p.add("probes", {cfg.probes, dims.probe_input}, std::move(t));
  }
  p.add_linear("enc.node", node_in, h, rng);
  std::size_t edge_in = dims.edge_features + (cfg.kind == ModelKind::ngt ? 1 : 0);
  p.add_linear("enc.edge", edge_in, he, rng);

  for (std::size_t k = 0; k < cfg.layers; ++k) {
    if (cfg.kind == ModelKind::gnn) {
      std::string pre = layer_prefix("gnn", k);
      p.add_linear(pre + "scale", he, h, rng);
      p.add_linear(pre + "shift", he, h, rng);
      p.add_linear(pre + "msg", 2 * h, h, rng);
      p.add_linear(pre + "upd1", 4 * h, h, rng);
      p.add_linear(pre + "upd2", h, h, rng);
      p.add_linear(pre + "edge", 2 * h + he, he, rng);
      // start from plain message passing: scale ~ 1
      auto sb = p.get(pre + "scale.b");
      for (auto& x : sb.mutable_data()) x = 1.0;
    } else {
      std::string pre = layer_prefix("ngt", k);
      p.add_linear(pre + "q", h, h, rng);
      p.add_linear(pre + "k", h, h, rng);
      p.add_linear(pre + "vn", h, h, rng);
      p.add_linear(pre + "vscale", he, h, rng, false);
      p.add_linear(pre + "vshift", he, h, rng, false);
      p.add_linear(pre + "ebias", he, cfg.heads, rng);
      p.add_linear(pre + "o", h, h, rng);
      add_norm(p, pre + "ln1", h);
      p.add_linear(pre + "ff1", h, 2 * h, rng);
      p.add_linear(pre + "ff2", 2 * h, h, rng);
      add_norm(p, pre + "ln2", h);
      p.add_linear(pre + "edge", 2 * h + he, he, rng);
      add_norm(p, pre + "ln3", he);
    }
  }

  std::size_t head_in = 0;
  switch (cfg.readout) {
    case Readout::invariant: head_in = dims.output_nodes * h + (cfg.pool_nodes ? h : 0); break;
    case Readout::per_node: head_in = h; break;
    case Readout::per_edge:
    case Readout::per_parameter: head_in = 2 * h + he; break;
  }
  p.add_linear("head.1", head_in, cfg.head_width, rng);
  p.add_linear("head.2", cfg.head_width, cfg.out_dim, rng);
  if (cfg.readout == Readout::per_parameter) {
    p.add_linear("node_head.1", h, cfg.head_width, rng);
    p.add_linear("node_head.2", cfg.head_width, cfg.out_dim, rng);
  }
  return m;
}

States encode(const Model& m, const GraphBatch& b) {
  const ModelConfig& c = m.config;
  const ParamStore& p = m.params;
  if (b.node_dim() != m.dims.node_features || b.edge_dim() != m.dims.edge_features)
    throw ModelError("batch feature widths (" + std::to_string(b.node_dim()) + ", " + std::to_string(b.edge_dim()) +
                     ") do not match the model's (" + std::to_string(m.dims.node_features) + ", " +
                     std::to_string(m.dims.edge_features) + ")");
  std::vector<Tensor> parts{b.node_x};
  if (c.activation_dim > 0) parts.push_back(ad::gather_rows(p.get("emb.activation"), b.activation));
  if (c.position_dim > 0) {
    for (auto s : b.position)
      if (s >= c.position_slots)
        throw ModelError("graph needs positional slot " + std::to_string(s) + ", model has " +
                         std::to_string(c.position_slots));
    parts.push_back(ad::gather_rows(p.get("emb.position"), b.position));
  }
  if (c.probes > 0) {
    if (b.probe_nets.size() != b.num_graphs) throw ModelError("batch was built without probe networks");
    std::vector<Tensor> rows;
    for (std::size_t g = 0; g < b.num_graphs; ++g) {
      Tensor vals = graph::probe_values(b.probe_nets[g], p.get("probes"));
      if (vals.dim(0) != b.node_offset[g + 1] - b.node_offset[g])
        throw ModelError("probe network of graph " + std::to_string(g) + " does not cover its nodes");
      rows.push_back(vals);
    }
    parts.push_back(ad::concat_rows(rows));
  }
  States s;
  s.v = ad::gelu(lin(p, "enc.node", ad::concat_cols(parts)));
  if (c.kind == ModelKind::ngt) {
    if (b.num_pairs == 0 && b.num_nodes > 0) throw ModelError("NG-T needs a batch built with node pairs");
    s.e = ad::gelu(lin(p, "enc.edge", b.pair_x));
  } else {
    s.e = ad::gelu(lin(p, "enc.edge", b.edge_x));
  }
  return s;
}

States gnn_layer(const Model& m, std::size_t k, const GraphBatch& b, const States& s, const RunOptions& run) {
  const ParamStore& p = m.params;
  std::string pre = layer_prefix("gnn", k);
  for (std::size_t e = 0; e < b.num_edges; ++e)
    if (b.src[e] >= b.num_nodes || b.dst[e] >= b.num_nodes) throw ModelError("edge " + std::to_string(e) + " is dangling");
  Tensor vs = ad::gather_rows(s.v, b.src), vd = ad::gather_rows(s.v, b.dst);
  Tensor msg = lin(p, pre + "scale", s.e) * lin(p, pre + "msg", cat({vs, vd})) + lin(p, pre + "shift", s.e);
  Tensor agg = cat({ad::segment_sum(msg, b.dst, b.num_nodes), ad::segment_mean(msg, b.dst, b.num_nodes),
                    ad::segment_max(msg, b.dst, b.num_nodes)});
  States out;
  out.v = lin(p, pre + "upd2", ad::gelu(lin(p, pre + "upd1", cat({s.v, agg}))));
  out.e = ad::gelu(lin(p, pre + "edge", cat({vs, s.e, vd})));
  out.v = drop(out.v, m.config.dropout, run);
  out.e = drop(out.e, m.config.dropout, run);
  return out;
}

States ngt_layer(const Model& m, std::size_t k, const GraphBatch& b, const States& s, const RunOptions& run) {
  const ParamStore& p = m.params;
  const ModelConfig& c = m.config;
  std::string pre = layer_prefix("ngt", k);
  std::size_t h = c.node_width, heads = c.heads;
  Tensor blocks = head_blocks(h, heads);

  Tensor q = ad::gather_rows(lin(p, pre + "q", s.v), b.pair_dst);
  Tensor key = ad::gather_rows(lin(p, pre + "k", s.v), b.pair_src);
  Tensor logits = ad::scale(ad::matmul(q * key, blocks), 1.0 / std::sqrt(static_cast<double>(h / heads))) +
                  lin(p, pre + "ebias", s.e);
  Tensor attn = ad::segment_softmax(logits, b.pair_dst, b.num_nodes);
  Tensor values = lin(p, pre + "vscale", s.e) * ad::gather_rows(lin(p, pre + "vn", s.v), b.pair_src) +
                  lin(p, pre + "vshift", s.e);
  Tensor mixed = ad::segment_sum(ad::matmul(attn, ad::transpose(blocks)) * values, b.pair_dst, b.num_nodes);

  Tensor v1 = norm(p, pre + "ln1", s.v + drop(lin(p, pre + "o", mixed), c.dropout, run));
  Tensor ff = lin(p, pre + "ff2", ad::gelu(lin(p, pre + "ff1", v1)));
  States out;
  out.v = norm(p, pre + "ln2", v1 + drop(ff, c.dropout, run));
  Tensor upd = ad::gelu(lin(p, pre + "edge", cat({ad::gather_rows(out.v, b.pair_src), s.e, ad::gather_rows(out.v, b.pair_dst)})));
  out.e = norm(p, pre + "ln3", s.e + drop(upd, c.dropout, run));
  return out;
}

Tensor readout(const Model& m, const GraphBatch& b, const States& s) {
  const ParamStore& p = m.params;
  const ModelConfig& c = m.config;
  Tensor x;
  switch (c.readout) {
    case Readout::invariant: {
      if (b.outputs_per_graph != m.dims.output_nodes)
        throw ModelError("graphs have " + std::to_string(b.outputs_per_graph) + " output nodes, the head expects " +
                         std::to_string(m.dims.output_nodes));
      x = ad::reshape(ad::gather_rows(s.v, b.output_nodes), {b.num_graphs, b.outputs_per_graph * c.node_width});
      if (c.pool_nodes) x = cat({x, ad::segment_mean(s.v, b.node_graph, b.num_graphs)});
      break;
    }
    case Readout::per_node: x = s.v; break;
    case Readout::per_edge:
    case Readout::per_parameter: {
      Tensor e = c.kind == ModelKind::ngt ? ad::gather_rows(s.e, b.edge_pair) : s.e;
      x = cat({ad::gather_rows(s.v, b.src), e, ad::gather_rows(s.v, b.dst)});
      break;
    }
  }
  Tensor out = lin(p, "head.2", ad::gelu(lin(p, "head.1", x)));
  if (c.readout != Readout::per_parameter) return out;
  Tensor nodes = lin(p, "node_head.2", ad::gelu(lin(p, "node_head.1", s.v)));
  std::vector<Tensor> rows{out, nodes};
  return ad::concat_rows(rows);
}

Tensor forward(const Model& m, const GraphBatch& b, const RunOptions& run) {
  States s = encode(m, b);
  for (std::size_t k = 0; k < m.config.layers; ++k)
    s = m.config.kind == ModelKind::gnn ? gnn_layer(m, k, b, s, run) : ngt_layer(m, k, b, s, run);
  return readout(m, b, s);
}

std::string model_to_json(const Model& m) {
  const ModelConfig& c = m.config;
  Json doc;
  doc["version"] = 1;
  doc["config"] = {{"kind", std::string(to_string(c.kind))},
                   {"layers", c.layers},
                   {"node_width", c.node_width},
                   {"edge_width", c.edge_width},
                   {"heads", c.heads},
                   {"dropout", c.dropout},
                   {"readout", std::string(to_string(c.readout))},
                   {"out_dim", c.out_dim},
                   {"head_width", c.head_width},
                   {"activation_dim", c.activation_dim},
                   {"position_dim", c.position_dim},
                   {"position_slots", c.position_slots},
                   {"probes", c.probes},
                   {"pool_nodes", c.pool_nodes}};
  doc["dims"] = {{"node_features", m.dims.node_features},
                 {"edge_features", m.dims.edge_features},
                 {"output_nodes", m.dims.output_nodes},
                 {"probe_input", m.dims.probe_input}};
  doc["tensors"] = Json::array();
  for (const auto& name : m.params.names()) {
    const Tensor& t = m.params.get(name);
    doc["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"data", util::encode_doubles(t.data())}});
  }
  return doc.dump(1);
}

Model model_from_json(const std::string& text) {
  Json doc = util::parse_json(text, "model file");
  if (util::size_field(doc, "version", "") != 1) throw FormatError("version: unsupported model file version");
  const Json& jc = util::field(doc, "config", "");
  ModelConfig c;
  try {
    c.kind = parse_model_kind(util::string_field(jc, "kind", "config"));
    c.readout = parse_readout(util::string_field(jc, "readout", "config"));
  } catch (const ModelError& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  c.layers = util::size_field(jc, "layers", "config");
  c.node_width = util::size_field(jc, "node_width", "config");
  c.edge_width = util::size_field(jc, "edge_width", "config");
  c.heads = util::size_field(jc, "heads", "config");
  c.dropout = util::number_field(jc, "dropout", "config");
  c.out_dim = util::size_field(jc, "out_dim", "config");
  c.head_width = util::size_field(jc, "head_width", "config");
  c.activation_dim = util::size_field(jc, "activation_dim", "config");
  c.position_dim = util::size_field(jc, "position_dim", "config");
  c.position_slots = util::size_field(jc, "position_slots", "config");
  c.probes = util::size_field(jc, "probes", "config");
  c.pool_nodes = util::bool_field(jc, "pool_nodes", "config");
  const Json& jd = util::field(doc, "dims", "");
  InputDims d{util::size_field(jd, "node_features", "dims"), util::size_field(jd, "edge_features", "dims"),
              util::size_field(jd, "output_nodes", "dims"), util::size_field(jd, "probe_input", "dims")};

  // rebuild the registry, then overwrite values so names and shapes are checked
  ad::Rng rng(0);
  Model m;
  try {
    m = init_model(c, d, rng);
  } catch (const ModelError& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  const Json& ts = util::array_field(doc, "tensors", "");
  if (ts.size() != m.params.names().size())
    throw FormatError("tensors: expected " + std::to_string(m.params.names().size()) + " entries, got " +
                      std::to_string(ts.size()));
  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::string path = "tensors[" + std::to_string(i) + "]";
    std::string name = util::string_field(ts[i], "name", path);
    if (name != m.params.names()[i])
      throw FormatError(path + ".name: expected '" + m.params.names()[i] + "', got '" + name + "'");
    auto values = util::decode_doubles(util::string_field(ts[i], "data", path), path + ".data");
    Tensor t = m.params.get(name);
    if (values.size() != t.size())
      throw FormatError(path + ".data: expected " + std::to_string(t.size()) + " values, got " + std::to_string(values.size()));
    std::copy(values.begin(), values.end(), t.mutable_data().begin());
  }
  return m;
}

void save_model(const Model& m, const std::string& path) { util::write_file(path, model_to_json(m)); }

Model load_model(const std::string& path) { return model_from_json(util::read_file(path)); }

}  // namespace ngraph::models
