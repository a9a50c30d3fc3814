#include "ngraph/graphbuild/io.hpp"

#include <cstring>

#include "ngraph/netzoo/serialize.hpp"
#include "ngraph/util/json_fields.hpp"

namespace ngraph::graph {

using util::FormatError;
using util::Json;

namespace {

constexpr std::string_view kMagic = "NGRAPH1\n";

std::string_view role_name(IoRole r) {
  switch (r) {
    case IoRole::input: return "input";
    case IoRole::hidden: return "hidden";
    case IoRole::output: return "output";
  }
  return "?";
}

IoRole parse_role(const std::string& s, const std::string& path) {
  if (s == "input") return IoRole::input;
  if (s == "hidden") return IoRole::hidden;
  if (s == "output") return IoRole::output;
  throw FormatError(path + ": unknown io role '" + s + "'");
}

Json layout_to_json(const GraphLayout& l) {
  return {{"window", {l.window_width, l.window_height}},
          {"base_edge_dim", l.base_edge_dim},
          {"scalar_slot", l.scalar_slot},
          {"linear_slot", l.linear_slot},
          {"linear_mode", std::string(to_string(l.linear_mode))},
          {"flatten_mode", std::string(to_string(l.flatten_mode))},
          {"direction", l.direction},
          {"undirected", l.undirected},
          {"normalized", l.normalized},
          {"probe_channels", l.probe_channels},
          {"activation_channels", l.activation_channels},
          {"position_channels", l.position_channels}};
}

GraphLayout layout_from_json(const Json& j, const std::string& path) {
  GraphLayout l;
  const Json& w = util::array_field(j, "window", path);
  if (w.size() != 2) throw FormatError(path + ".window: expected [width, height]");
  l.window_width = util::as_size(w[0], path + ".window[0]");
  l.window_height = util::as_size(w[1], path + ".window[1]");
  l.base_edge_dim = util::size_field(j, "base_edge_dim", path);
  l.scalar_slot = util::size_field(j, "scalar_slot", path);
  l.linear_slot = util::size_field(j, "linear_slot", path);
  try {
    l.linear_mode = parse_linear_mode(util::string_field(j, "linear_mode", path));
    l.flatten_mode = parse_flatten_mode(util::string_field(j, "flatten_mode", path));
  } catch (const std::invalid_argument& e) {
    throw FormatError(path + ": " + e.what());
  }
  l.direction = util::bool_field(j, "direction", path);
  l.undirected = util::bool_field(j, "undirected", path);
  l.normalized = util::bool_field(j, "normalized", path);
  l.probe_channels = util::size_field(j, "probe_channels", path);
  l.activation_channels = util::size_field(j, "activation_channels", path);
  l.position_channels = util::size_field(j, "position_channels", path);
  return l;
}

template <typename T>
Json size_array(const std::vector<T>& v) {
  Json a = Json::array();
  for (auto x : v) a.push_back(static_cast<std::size_t>(x));
  return a;
}

std::vector<std::size_t> read_sizes(const Json& obj, std::string_view key, std::size_t n, const std::string& path) {
  const Json& a = util::array_field(obj, key, path);
  std::string p = path + "." + std::string(key);
  if (a.size() != n) throw FormatError(p + ": expected " + std::to_string(n) + " entries, got " + std::to_string(a.size()));
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(util::as_size(a[i], p + "[" + std::to_string(i) + "]"));
  return out;
}

Json doubles_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

std::vector<double> read_doubles(const Json& obj, std::string_view key, const std::string& path) {
  const Json& a = util::array_field(obj, key, path);
  std::vector<double> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw FormatError(path + "." + std::string(key) + "[" + std::to_string(i) + "]: expected a number");
    out.push_back(a[i].get<double>());
  }
  return out;
}

class Reader {
public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n)
      throw FormatError("graph file truncated at byte " + std::to_string(pos_) + " while reading " + what);
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = util::read_u64_le(b_.data() + pos_);
    pos_ += 8;
    return v;
  }
  std::vector<double> doubles(std::size_t n, const char* what) {
    need(n * 8, what);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = util::read_double_le(b_.data() + pos_ + 8 * i);
    pos_ += n * 8;
    return v;
  }
  std::vector<std::size_t> sizes(std::size_t n, const char* what) {
    need(n * 8, what);
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = util::read_u64_le(b_.data() + pos_ + 8 * i);
    pos_ += n * 8;
    return v;
  }
  std::vector<std::uint8_t> bytes(std::size_t n, const char* what) {
    need(n, what);
    std::vector<std::uint8_t> v(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return v;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> graph_to_bytes(const NeuralGraph& g) {
  check_graph(g);
  Json h;
  h["version"] = 1;
  h["n"] = g.num_nodes;
  h["d_V"] = g.node_dim;
  h["d_E"] = g.edge_dim;
  h["num_edges"] = g.num_edges();
  h["layout"] = layout_to_json(g.layout);
  h["bands"] = Json::array();
  for (const Band& b : g.bands)
    h["bands"].push_back({{"kind", std::string(to_string(b.kind))},
                          {"layer", b.layer},
                          {"group", b.group},
                          {"first", b.first},
                          {"channels", b.channels},
                          {"spatial", b.spatial}});
  Json roles = Json::array(), acts = Json::array();
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    roles.push_back(std::string(role_name(g.node_role[i])));
    acts.push_back(std::string(zoo::to_string(g.node_activation[i])));
  }
  h["nodes"] = {{"band", size_array(g.node_band)},
                {"index", size_array(g.node_index)},
                {"spatial", size_array(g.node_spatial)},
                {"position", size_array(g.node_position)},
                {"role", roles},
                {"activation", acts}};
  h["spec"] = Json::array();
  for (const auto& s : g.spec) h["spec"].push_back(zoo::spec_to_json(s));
  h["stats"] = Json::array();
  for (const BandStats& s : g.stats)
    h["stats"].push_back({{"weight_mean", doubles_json(s.weight_mean)},
                          {"weight_std", doubles_json(s.weight_std)},
                          {"bias_mean", s.bias_mean},
                          {"bias_std", s.bias_std}});
  h["metadata"] = g.metadata;
  std::string header = h.dump();

  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  util::append_u64_le(out, header.size());
  out.insert(out.end(), header.begin(), header.end());
  util::append_doubles_le(out, g.node_features);
  for (auto v : g.edge_src) util::append_u64_le(out, v);
  for (auto v : g.edge_dst) util::append_u64_le(out, v);
  for (auto k : g.edge_kind) out.push_back(static_cast<std::uint8_t>(k));
  out.insert(out.end(), g.edge_backward.begin(), g.edge_backward.end());
  util::append_doubles_le(out, g.edge_features);
  return out;
}

NeuralGraph graph_from_bytes(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw FormatError("not a graph file: bad magic");
  Reader rd(bytes);
  rd.bytes(kMagic.size(), "magic");
  std::size_t hlen = rd.u64("header length");
  auto hb = rd.bytes(hlen, "header");
  Json h = util::parse_json(std::string(hb.begin(), hb.end()), "graph header");
  if (util::size_field(h, "version", "header") != 1) throw FormatError("header.version: unsupported graph file version");

  NeuralGraph g;
  g.num_nodes = util::size_field(h, "n", "header");
  g.node_dim = util::size_field(h, "d_V", "header");
  g.edge_dim = util::size_field(h, "d_E", "header");
  std::size_t m = util::size_field(h, "num_edges", "header");
  g.layout = layout_from_json(util::field(h, "layout", "header"), "header.layout");
  const Json& bands = util::array_field(h, "bands", "header");
  for (std::size_t i = 0; i < bands.size(); ++i) {
    std::string p = "header.bands[" + std::to_string(i) + "]";
    Band b;
    try {
      b.kind = parse_band_kind(util::string_field(bands[i], "kind", p));
    } catch (const std::invalid_argument& e) {
      throw FormatError(p + ": " + e.what());
    }
    b.layer = util::size_field(bands[i], "layer", p);
    b.group = util::size_field(bands[i], "group", p);
    b.first = util::size_field(bands[i], "first", p);
    b.channels = util::size_field(bands[i], "channels", p);
    b.spatial = util::size_field(bands[i], "spatial", p);
    g.bands.push_back(b);
  }
  const Json& nodes = util::field(h, "nodes", "header");
  g.node_band = read_sizes(nodes, "band", g.num_nodes, "header.nodes");
  g.node_index = read_sizes(nodes, "index", g.num_nodes, "header.nodes");
  g.node_spatial = read_sizes(nodes, "spatial", g.num_nodes, "header.nodes");
  g.node_position = read_sizes(nodes, "position", g.num_nodes, "header.nodes");
  const Json& roles = util::array_field(nodes, "role", "header.nodes");
  const Json& acts = util::array_field(nodes, "activation", "header.nodes");
  if (roles.size() != g.num_nodes || acts.size() != g.num_nodes)
    throw FormatError("header.nodes: role/activation lists do not match n");
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    std::string p = "header.nodes.activation[" + std::to_string(i) + "]";
    if (!roles[i].is_string()) throw FormatError("header.nodes.role[" + std::to_string(i) + "]: expected a string");
    if (!acts[i].is_string()) throw FormatError(p + ": expected a string");
    g.node_role.push_back(parse_role(roles[i].get<std::string>(), "header.nodes.role[" + std::to_string(i) + "]"));
    try {
      g.node_activation.push_back(zoo::parse_activation(acts[i].get<std::string>()));
    } catch (const std::invalid_argument& e) {
      throw FormatError(p + ": " + e.what());
    }
  }
  const Json& spec = util::array_field(h, "spec", "header");
  for (std::size_t i = 0; i < spec.size(); ++i)
    g.spec.push_back(zoo::spec_from_json(spec[i], "header.spec[" + std::to_string(i) + "]"));
  const Json& stats = util::array_field(h, "stats", "header");
  for (std::size_t i = 0; i < stats.size(); ++i) {
    std::string p = "header.stats[" + std::to_string(i) + "]";
    BandStats s;
    s.weight_mean = read_doubles(stats[i], "weight_mean", p);
    s.weight_std = read_doubles(stats[i], "weight_std", p);
    s.bias_mean = util::number_field(stats[i], "bias_mean", p);
    s.bias_std = util::number_field(stats[i], "bias_std", p);
    g.stats.push_back(std::move(s));
  }
  const Json& meta = util::field(h, "metadata", "header");
  if (!meta.is_object()) throw FormatError("header.metadata: expected an object");
  for (auto it = meta.begin(); it != meta.end(); ++it) {
    if (!it.value().is_string()) throw FormatError("header.metadata." + it.key() + ": expected a string");
    g.metadata[it.key()] = it.value().get<std::string>();
  }

  g.node_features = rd.doubles(g.num_nodes * g.node_dim, "node features");
  g.edge_src = rd.sizes(m, "edge sources");
  g.edge_dst = rd.sizes(m, "edge destinations");
  for (auto k : rd.bytes(m, "edge kinds")) {
    if (k > static_cast<std::uint8_t>(EdgeKind::virtual_link)) throw FormatError("edge kind byte " + std::to_string(k) + " is unknown");
    g.edge_kind.push_back(static_cast<EdgeKind>(k));
  }
  g.edge_backward = rd.bytes(m, "edge directions");
  g.edge_features = rd.doubles(m * g.edge_dim, "edge features");
  if (!rd.done()) throw FormatError("graph file has trailing bytes after offset " + std::to_string(rd.pos()));
  try {
    check_graph(g);
  } catch (const GraphError& e) {
    throw FormatError(std::string("inconsistent graph file: ") + e.what());
  }
  return g;
}

void save_graph(const NeuralGraph& g, const std::string& path) {
  auto bytes = graph_to_bytes(g);
  util::write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

NeuralGraph load_graph(const std::string& path) {
  std::string text = util::read_file(path);
  return graph_from_bytes(std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace ngraph::graph
