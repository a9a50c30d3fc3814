#include "ngraph/netzoo/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace ngraph::zoo {

namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 5> kKinds{{
    {LayerKind::linear, "linear"},
    {LayerKind::conv2d, "conv2d"},
    {LayerKind::norm, "norm"},
    {LayerKind::attention, "attention"},
    {LayerKind::flatten, "flatten"},
}};

constexpr std::array<std::pair<Activation, std::string_view>, kNumActivations> kActivations{{
    {Activation::identity, "identity"},
    {Activation::relu, "relu"},
    {Activation::gelu, "gelu"},
    {Activation::tanh, "tanh"},
    {Activation::sigmoid, "sigmoid"},
    {Activation::leaky_relu, "leaky_relu"},
    {Activation::sine, "sine"},
}};

[[noreturn]] void fail(std::size_t layer, const std::string& msg) {
  throw CheckpointError("layer " + std::to_string(layer) + ": " + msg);
}

bool spatial(LayerKind k) { return k == LayerKind::conv2d; }

}  // namespace

std::string_view to_string(LayerKind k) {
  for (auto& [v, s] : kKinds)
    if (v == k) return s;
  return "?";
}

std::string_view to_string(Activation a) {
  for (auto& [v, s] : kActivations)
    if (v == a) return s;
  return "?";
}

LayerKind parse_layer_kind(std::string_view s) {
  for (auto& [v, name] : kKinds)
    if (name == s) return v;
  throw std::invalid_argument("unknown layer kind '" + std::string(s) + "'");
}

Activation parse_activation(std::string_view s) {
  for (auto& [v, name] : kActivations)
    if (name == s) return v;
  throw std::invalid_argument("unknown activation id '" + std::string(s) + "'");
}

ad::UnaryOp unary_op(Activation a) {
  switch (a) {
    case Activation::identity: return ad::UnaryOp::identity;
    case Activation::relu: return ad::UnaryOp::relu;
    case Activation::gelu: return ad::UnaryOp::gelu;
    case Activation::tanh: return ad::UnaryOp::tanh;
    case Activation::sigmoid: return ad::UnaryOp::sigmoid;
    case Activation::leaky_relu: return ad::UnaryOp::leaky_relu;
    case Activation::sine: return ad::UnaryOp::sin;
  }
  return ad::UnaryOp::identity;
}

LayerSpec linear_layer(std::size_t in, std::size_t out, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::linear;
  s.in_dim = in;
  s.out_dim = out;
  s.activation = act;
  return s;
}

LayerSpec conv_layer(std::size_t in, std::size_t out, KernelSize kernel, Activation act, bool pool) {
  LayerSpec s = linear_layer(in, out, act);
  s.kind = LayerKind::conv2d;
  s.kernel = kernel;
  s.pool = pool;
  return s;
}

LayerSpec norm_layer(std::size_t dim, Activation act) {
  LayerSpec s = linear_layer(dim, dim, act);
  s.kind = LayerKind::norm;
  return s;
}

LayerSpec attention_layer(std::size_t dim, std::size_t heads, std::size_t head_dim, Activation act) {
  LayerSpec s = linear_layer(dim, dim, act);
  s.kind = LayerKind::attention;
  s.heads = heads;
  s.head_dim = head_dim;
  return s;
}

bool Checkpoint::has_conv() const {
  return std::any_of(spec.begin(), spec.end(), [](const LayerSpec& s) { return s.kind == LayerKind::conv2d; });
}

bool Checkpoint::has_attention() const {
  return std::any_of(spec.begin(), spec.end(), [](const LayerSpec& s) { return s.kind == LayerKind::attention; });
}

ParamShape param_shape(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::linear: return {s.out_dim * s.in_dim, s.out_dim, 0};
    case LayerKind::conv2d: {
      std::size_t k = s.kernel ? s.kernel->width * s.kernel->height : 0;
      return {s.out_dim * s.in_dim * k, s.out_dim, 0};
    }
    case LayerKind::norm: return {s.out_dim, s.out_dim, 0};
    case LayerKind::attention: {
      std::size_t hd = s.heads * s.head_dim;
      return {s.out_dim * hd, s.out_dim, hd * s.in_dim};
    }
    case LayerKind::flatten: return {0, 0, 0};
  }
  return {};
}

void validate_spec(const std::vector<LayerSpec>& spec) {
  if (spec.empty()) throw CheckpointError("network has no layers");
  bool seen_dense = false;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const LayerSpec& s = spec[i];
    std::size_t l = i + 1;
    if (s.in_dim == 0 || s.out_dim == 0) fail(l, "zero-width layer");
    if (i > 0 && s.in_dim != spec[i - 1].out_dim)
      fail(l, "input width " + std::to_string(s.in_dim) + " does not match previous output " +
                  std::to_string(spec[i - 1].out_dim));
    if (s.kind == LayerKind::conv2d) {
      if (!s.kernel || s.kernel->width == 0 || s.kernel->height == 0) fail(l, "conv2d requires a kernel size");
      if (seen_dense) fail(l, "conv2d after a dense layer");
    } else {
      if (s.kernel) fail(l, std::string(to_string(s.kind)) + " layer must not carry a kernel");
      if (s.pool) fail(l, "pooling is only defined for conv2d");
    }
    switch (s.kind) {
      case LayerKind::linear: seen_dense = true; break;
      case LayerKind::conv2d: break;
      case LayerKind::norm:
        if (s.in_dim != s.out_dim) fail(l, "norm layer must preserve width");
        if (i > 0 && spatial(spec[i - 1].kind)) fail(l, "norm after conv2d");
        break;
      case LayerKind::attention:
        if (s.heads == 0 || s.head_dim == 0) fail(l, "attention needs heads and head_dim");
        if (i > 0 && spatial(spec[i - 1].kind)) fail(l, "attention after conv2d");
        seen_dense = true;
        break;
      case LayerKind::flatten:
        if (i == 0 || spec[i - 1].kind != LayerKind::conv2d) fail(l, "flatten must follow a conv2d layer");
        if (i + 1 >= spec.size() || spec[i + 1].kind != LayerKind::linear) fail(l, "flatten must precede a linear layer");
        if (s.spatial_height == 0 || s.spatial_width == 0) fail(l, "flatten needs the feature-map size");
        if (s.out_dim != s.in_dim * s.spatial_height * s.spatial_width)
          fail(l, "flatten output must equal channels x height x width");
        break;
    }
    if (s.residual_source) {
      std::size_t src = *s.residual_source;
      if (src + 2 > l) fail(l, "residual source " + std::to_string(src) + " must be at least two layers earlier");
      if (s.kind != LayerKind::linear && s.kind != LayerKind::conv2d)
        fail(l, "residual destination must be linear or conv2d");
      if (src > 0 && spec[src - 1].kind == LayerKind::flatten) fail(l, "residual source cannot be a flatten layer");
      bool src_spatial = src == 0 ? spec[0].kind == LayerKind::conv2d : spatial(spec[src - 1].kind);
      if (src_spatial != spatial(s.kind)) fail(l, "residual connects spatial and dense layers");
      if (!src_spatial) {
        for (std::size_t k = src; k + 1 < l; ++k)
          if (spec[k].kind == LayerKind::attention) fail(l, "residual spans an attention layer");
      }
    }
  }
}

void validate(const Checkpoint& net) {
  validate_spec(net.spec);
  if (net.params.size() != net.spec.size())
    throw CheckpointError("parameter list has " + std::to_string(net.params.size()) + " layers, spec has " +
                          std::to_string(net.spec.size()));
  for (std::size_t i = 0; i < net.spec.size(); ++i) {
    ParamShape ps = param_shape(net.spec[i]);
    const LayerParams& p = net.params[i];
    if (p.weight.size() != ps.weight) fail(i + 1, "weight has " + std::to_string(p.weight.size()) + " entries, expected " + std::to_string(ps.weight));
    if (p.bias.size() != ps.bias) fail(i + 1, "bias has " + std::to_string(p.bias.size()) + " entries, expected " + std::to_string(ps.bias));
    for (const auto* proj : {&p.query, &p.key, &p.value})
      if (proj->size() != ps.projection) fail(i + 1, "attention projection has wrong size");
  }
}

std::vector<NeuronGroup> neuron_groups(const Checkpoint& net) {
  std::vector<NeuronGroup> g;
  g.push_back({0, net.input_dim(), false});
  for (std::size_t i = 0; i < net.spec.size(); ++i) {
    const LayerSpec& s = net.spec[i];
    switch (s.kind) {
      case LayerKind::flatten: break;
      case LayerKind::attention:
        g.push_back({i + 1, s.heads * s.head_dim, true});
        g.push_back({i + 1, s.out_dim, false});
        break;
      default: g.push_back({i + 1, s.out_dim, false});
    }
  }
  return g;
}

std::size_t output_group_of_layer(const std::vector<NeuronGroup>& groups, std::size_t layer) {
  // flatten layers own no group; their output is the preceding conv group
  std::size_t best = 0;
  for (std::size_t k = 0; k < groups.size(); ++k)
    if (groups[k].layer <= layer && !groups[k].attention_heads) best = k;
  return best;
}

}  // namespace ngraph::zoo
