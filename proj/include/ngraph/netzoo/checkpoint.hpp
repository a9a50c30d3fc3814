#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ngraph/autodiff/ops.hpp"

namespace ngraph::zoo {

enum class LayerKind { linear, conv2d, norm, attention, flatten };
enum class Activation { identity, relu, gelu, tanh, sigmoid, leaky_relu, sine };

inline constexpr std::size_t kNumActivations = 7;

std::string_view to_string(LayerKind k);
std::string_view to_string(Activation a);
/// Throws std::invalid_argument naming the unknown id.
LayerKind parse_layer_kind(std::string_view s);
Activation parse_activation(std::string_view s);
ad::UnaryOp unary_op(Activation a);

struct KernelSize {
  std::size_t width = 1;
  std::size_t height = 1;
  bool operator==(const KernelSize&) const = default;
};

/// One layer of an input network. Layers are numbered from 1; position 0 is
/// the network input, so `residual_source` names the layer whose output is
/// added (0 = raw input).
struct LayerSpec {
  LayerKind kind = LayerKind::linear;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::optional<KernelSize> kernel;  // required for conv2d, absent otherwise
  Activation activation = Activation::identity;
  std::optional<std::size_t> residual_source;
  bool pool = false;  // conv2d: 2x2 average pool after the activation
  std::size_t heads = 0;
  std::size_t head_dim = 0;
  // flatten: spatial extent of the incoming feature map
  std::size_t spatial_height = 0;
  std::size_t spatial_width = 0;

  bool operator==(const LayerSpec&) const = default;
};

LayerSpec linear_layer(std::size_t in, std::size_t out, Activation act);
LayerSpec conv_layer(std::size_t in, std::size_t out, KernelSize kernel, Activation act, bool pool = false);
LayerSpec norm_layer(std::size_t dim, Activation act = Activation::identity);
LayerSpec attention_layer(std::size_t dim, std::size_t heads, std::size_t head_dim, Activation act = Activation::identity);

/// Parameter storage per layer, all row-major.
///  linear:    weight [out, in], bias [out]
///  conv2d:    weight [out, in, height, width], bias [out]
///  norm:      weight = gamma [d], bias = beta [d]
///  attention: query/key/value [heads*head_dim, in], weight = W^O [out, heads*head_dim], bias [out]
///  flatten:   empty
struct LayerParams {
  std::vector<double> weight;
  std::vector<double> bias;
  std::vector<double> query;
  std::vector<double> key;
  std::vector<double> value;

  bool operator==(const LayerParams&) const = default;
};

struct Checkpoint {
  std::vector<LayerSpec> spec;
  std::vector<LayerParams> params;
  std::map<std::string, std::string> metadata;

  std::size_t num_layers() const { return spec.size(); }
  std::size_t input_dim() const { return spec.empty() ? 0 : spec.front().in_dim; }
  std::size_t output_dim() const { return spec.empty() ? 0 : spec.back().out_dim; }
  bool has_conv() const;
  bool has_attention() const;

  bool operator==(const Checkpoint&) const = default;
};

class CheckpointError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Expected parameter lengths for a layer.
struct ParamShape {
  std::size_t weight = 0, bias = 0, projection = 0;
};
ParamShape param_shape(const LayerSpec& s);

/// Checks dimensions chain, kernel rules, residual rules and parameter sizes.
void validate(const Checkpoint& net);
void validate_spec(const std::vector<LayerSpec>& spec);

/// Neuron groups in network order. Group 0 is the input; attention layers add
/// a head group followed by an output group; flatten adds none.
struct NeuronGroup {
  std::size_t layer = 0;  // 0 for input, else 1-based layer position
  std::size_t size = 0;
  bool attention_heads = false;
};
std::vector<NeuronGroup> neuron_groups(const Checkpoint& net);

/// Index of the neuron group holding layer `layer`'s output.
std::size_t output_group_of_layer(const std::vector<NeuronGroup>& groups, std::size_t layer);

}  // namespace ngraph::zoo
