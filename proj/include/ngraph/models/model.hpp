#pragma once

#include <string>
#include <string_view>

#include "ngraph/autodiff/ops.hpp"
#include "ngraph/models/batch.hpp"
#include "ngraph/models/params.hpp"

namespace ngraph::models {

enum class ModelKind { gnn, ngt };
enum class Readout { invariant, per_node, per_edge, per_parameter };

std::string_view to_string(ModelKind k);
std::string_view to_string(Readout r);
ModelKind parse_model_kind(std::string_view s);
Readout parse_readout(std::string_view s);

struct ModelConfig {
  ModelKind kind = ModelKind::gnn;
  std::size_t layers = 3;
  std::size_t node_width = 32;
  std::size_t edge_width = 16;
  std::size_t heads = 4;  // NG-T only
  double dropout = 0.0;
  Readout readout = Readout::invariant;
  std::size_t out_dim = 1;
  std::size_t head_width = 64;
  // learned node embeddings; 0 switches a table off
  std::size_t activation_dim = 8;
  std::size_t position_dim = 16;
  std::size_t position_slots = 64;
  std::size_t probes = 0;  // learnable probe inputs (dense source networks only)
  // invariant readout: also mean-pool every node state of the graph
  bool pool_nodes = true;

  bool operator==(const ModelConfig&) const = default;
};

/// Throws ModelError for zero layers/widths, widths not divisible by heads,
/// or a dropout rate outside [0, 1).
void validate(const ModelConfig& cfg);

/// Sizes of the data the model was built for.
struct InputDims {
  std::size_t node_features = 1;
  std::size_t edge_features = 1;
  std::size_t output_nodes = 1;
  std::size_t probe_input = 0;  // d_0 of the source networks when probes > 0
  bool operator==(const InputDims&) const = default;
};

struct Model {
  ModelConfig config;
  InputDims dims;
  ParamStore params;
};

Model init_model(const ModelConfig& cfg, const InputDims& dims, ad::Rng& rng);

/// Node states [N, node_width] and edge states: one row per edge for NG-GNN,
/// one row per node pair for NG-T.
struct States {
  ad::Tensor v, e;
};

struct RunOptions {
  bool training = false;
  ad::Rng* rng = nullptr;  // required when training with dropout
};

/// Batch options a model needs (pairs for NG-T, probe networks for probes).
BatchOptions batch_options(const ModelConfig& cfg);

States encode(const Model& m, const GraphBatch& b);
/// FiLM message passing with concatenated {sum, mean, max} aggregation and
/// an edge update from [v_src, e, v_dst].
States gnn_layer(const Model& m, std::size_t k, const GraphBatch& b, const States& s, const RunOptions& run = {});
/// Relational attention over all node pairs: additive edge bias on the
/// logits, values (W_scale e) * (W_n v_src) + W_shift e, then a feed-forward
/// block and an edge update, each with residual and layer norm.
States ngt_layer(const Model& m, std::size_t k, const GraphBatch& b, const States& s, const RunOptions& run = {});
/// invariant: [G, out]; per_node: [N, out]; per_edge: [E, out] in batch
/// edge order; per_parameter: the per-edge rows followed by the per-node
/// rows, [E + N, out], from two separate heads.
ad::Tensor readout(const Model& m, const GraphBatch& b, const States& s);
ad::Tensor forward(const Model& m, const GraphBatch& b, const RunOptions& run = {});

/// JSON container {version, config, dims, tensors: [{name, shape, data}]}
/// with base64 little-endian float64 blobs.
std::string model_to_json(const Model& m);
Model model_from_json(const std::string& text);
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace ngraph::models
