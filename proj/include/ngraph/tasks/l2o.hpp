#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "ngraph/graphbuild/graph.hpp"
#include "ngraph/models/model.hpp"
#include "ngraph/netzoo/checkpoint.hpp"
#include "ngraph/tasks/metrics.hpp"

namespace ngraph::tasks {

inline constexpr std::array<double, 5> kMomentumScales{0.5, 0.9, 0.99, 0.999, 0.9999};
/// (log-magnitude, sign) of weight, gradient and the five momenta.
inline constexpr std::size_t kL2OChannels = 14;
/// log(1e-8): the log channel of any |v| < 1e-8.
inline constexpr double kLogFloor = -18.42;

/// Per-parameter optimizer state in flatten_weights order.
struct L2OState {
  std::vector<double> grad;
  std::array<std::vector<double>, 5> momentum;
  std::size_t step = 0;
};

L2OState init_l2o_state(std::size_t num_params);
/// Stores the gradient and advances every momentum m <- b m + (1 - b) g.
void update_l2o_state(L2OState& s, std::span<const double> grad);
/// log|v| (kLogFloor below 1e-8) and sign(v) in {-1, 0, 1}.
std::array<double, 2> log_sign(double v);
/// Row-major [P, 14] feature matrix.
std::vector<double> l2o_feature_rows(std::span<const double> weights, const L2OState& s);

/// Neural graph of a dense network whose node (bias) and edge (weight)
/// features are replaced by the 14 optimizer channels. Input nodes carry the
/// channels of a zero parameter.
graph::NeuralGraph extract_l2o_features(const L2OState& s, const zoo::Checkpoint& net);
/// For each flat parameter, its row in a per-parameter readout of the
/// network's graph: weights map to their edge, biases to num_edges + node.
std::vector<std::size_t> parameter_rows(const graph::NeuralGraph& g, const zoo::Checkpoint& net);

/// Regression problem the optimizee is trained on: a fixed random teacher
/// network labels uniform inputs.
struct OptimizeeConfig {
  std::vector<std::size_t> widths{2, 16, 16, 1};
  zoo::Activation activation = zoo::Activation::tanh;
  std::size_t samples = 64;
  std::uint64_t data_seed = 0;
};

struct Optimizee {
  std::vector<zoo::LayerSpec> spec;
  ad::Tensor x, y;
};

Optimizee make_optimizee(const OptimizeeConfig& cfg);
zoo::Checkpoint init_optimizee(const Optimizee& task, std::uint64_t seed);
double optimizee_loss(const Optimizee& task, const zoo::Checkpoint& net);

enum class L2OKind { ff, ng_gnn };
std::string_view to_string(L2OKind k);
L2OKind parse_l2o_kind(std::string_view s);

struct L2OConfig {
  L2OKind kind = L2OKind::ff;
  std::size_t hidden = 32;         // FF width
  double step_scale = 0.01;        // update = step_scale * FF output
  std::size_t embedding = 8;       // NG-fed: per-parameter embedding width
  models::ModelConfig gnn;         // NG-fed encoder (readout forced to per-parameter)
  std::size_t horizon = 100;       // inner steps per optimizee run
  std::size_t unroll = 20;         // truncation length
  std::size_t outer_steps = 100;   // meta-updates
  double lr = 3e-3;                // meta-optimizer (Adam) rate
  std::uint64_t seed = 0;
};

L2OConfig default_l2o_config(L2OKind kind);

struct LearnedOptimizer {
  L2OConfig config;
  models::ParamStore ff;
  std::optional<models::Model> encoder;
};

struct L2OReport {
  std::vector<double> outer_loss;  // mean inner loss per completed outer step
  std::size_t aborted = 0;         // outer steps dropped for a non-finite inner loss
};

LearnedOptimizer init_learned_optimizer(const L2OConfig& cfg, const Optimizee& task);
/// Meta-trains with truncated unrolls over fresh optimizee initializations;
/// the outer objective is the mean inner loss of each truncation window.
LearnedOptimizer l2o_train(const L2OConfig& cfg, const Optimizee& task, L2OReport* report = nullptr);

/// Loss before the first step and after every step.
std::vector<double> run_learned(const LearnedOptimizer& opt, const Optimizee& task, zoo::Checkpoint net,
                                std::size_t steps);
std::vector<double> run_sgd(const Optimizee& task, zoo::Checkpoint net, double lr, std::size_t steps);
/// Learning rate from {1e-3, 3e-3, ..., 1} with the lowest mean final loss
/// over the given initialization seeds.
double tune_sgd_lr(const Optimizee& task, std::span<const std::uint64_t> seeds, std::size_t steps);

}  // namespace ngraph::tasks
