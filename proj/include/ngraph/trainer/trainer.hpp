#pragma once

#include <functional>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ngraph/graphbuild/graph.hpp"
#include "ngraph/models/model.hpp"
#include "ngraph/tasks/dataset.hpp"

namespace ngraph::train {

class TrainError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// `automatic` picks cross-entropy for class labels, BCE for scalars and
/// MSE for deltas.
enum class Loss { automatic, cross_entropy, mse, bce };
std::string_view to_string(Loss l);
Loss parse_loss(std::string_view s);

struct TrainConfig {
  models::ModelConfig model;  // readout and out_dim are set from the task
  std::size_t epochs = 100;
  std::size_t batch = 16;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t patience = 20;  // epochs without validation improvement; 0 stops at the first
  Loss loss = Loss::automatic;
  bool normalize = true;   // layerwise weight/bias standardization
  bool direction = false;  // backward edge copies with direction channels
};

/// Sets one option; model options use a "model." prefix (model.layers,
/// model.kind, ...). Throws TrainError for unknown keys or bad values.
void set_option(TrainConfig& cfg, std::string_view key, std::string_view value);
/// `key = value` lines; '#' starts a comment.
TrainConfig parse_train_config(std::string_view text, TrainConfig base = {});

/// A trained model plus the preprocessing it expects.
struct Predictor {
  models::Model model;
  tasks::TargetKind kind = tasks::TargetKind::class_label;
  Loss loss = Loss::cross_entropy;
  bool normalize = true;
  bool direction = false;
  std::vector<graph::BandStats> stats;  // training-set statistics when normalizing
};

/// Raw graph -> model input.
graph::NeuralGraph prepare(const Predictor& p, const graph::NeuralGraph& raw);
/// One output vector per graph: class logits, the predicted scalar (after the
/// sigmoid for BCE), or the per-edge then per-node deltas.
std::vector<std::vector<double>> predict(const Predictor& p, const std::vector<graph::NeuralGraph>& raw,
                                         std::size_t batch = 16);

/// accuracy (class labels); kendall_tau and mse (scalars); mse, zero_mse,
/// function_error and zero_function_error (deltas, where zero_* is the
/// all-zero delta).
std::map<std::string, double> evaluate(const Predictor& p, const tasks::TaskDataset& d, tasks::Split split);

struct LogRow {
  std::size_t epoch = 0;
  std::string split, metric;
  double value = 0.0;
};
void write_log_csv(const std::vector<LogRow>& rows, std::ostream& out);

struct FitResult {
  Predictor predictor;             // parameters of the best validation epoch
  std::size_t best_epoch = 0;
  double best_val = 0.0;           // selection score of that epoch
  std::map<std::string, double> test;
  std::vector<LogRow> log;
};

/// Adam on the train split with early stopping on the validation split
/// (accuracy, Kendall tau or -MSE). Without validation records the last
/// epoch is kept. Deterministic for a given config.
FitResult fit(const tasks::TaskDataset& d, const TrainConfig& cfg,
              const std::function<void(const LogRow&)>& on_row = {});

/// JSON {version, kind, loss, normalize, direction, stats, model}.
void save_predictor(const Predictor& p, const std::string& path);
Predictor load_predictor(const std::string& path);

}  // namespace ngraph::train
