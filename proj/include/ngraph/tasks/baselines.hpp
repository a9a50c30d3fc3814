#pragma once

#include <cstdint>
#include <vector>

#include "ngraph/tasks/dataset.hpp"

namespace ngraph::tasks {

/// Two-hidden-layer MLP on a fixed feature vector per record.
struct BaselineConfig {
  std::size_t hidden = 64;
  std::size_t epochs = 200;
  std::size_t batch = 16;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double dropout = 0.0;
  std::size_t patience = 30;
  std::uint64_t seed = 0;
};

struct BaselineResult {
  double val_metric = 0.0;   // accuracy or Kendall tau, best epoch
  double test_metric = 0.0;
  std::size_t best_epoch = 0;
};

/// Trains on the train split (features standardized with train statistics),
/// selects the epoch with the best validation metric and reports its test
/// metric. Class labels use cross-entropy and accuracy, scalars use MSE and
/// Kendall tau. `features[i]` belongs to record i.
BaselineResult train_vector_baseline(const TaskDataset& d, const std::vector<std::vector<double>>& features,
                                     const BaselineConfig& cfg = {});

/// Every parameter in layer order (weights then bias per layer).
std::vector<double> flatten_weights(const zoo::Checkpoint& net);

/// Test accuracy of 1-nearest-neighbour (Euclidean) against the train split.
double nearest_neighbor_accuracy(const TaskDataset& d, const std::vector<std::vector<double>>& features);

}  // namespace ngraph::tasks
