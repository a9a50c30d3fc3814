#pragma once

#include "ngraph/autodiff/rng.hpp"
#include "ngraph/netzoo/zoo.hpp"
#include "ngraph/tasks/dataset.hpp"

namespace ngraph::tasks {

struct GeneralizationConfig {
  std::size_t count = 200;
  double val_fraction = 0.1;   // of the training runs (lineages)
  double test_fraction = 0.25;
  zoo::WildParkConfig zoo;
};

/// Mini Wild Park: heterogeneous CNN checkpoints with their held-out
/// accuracy as target. Whole training runs go to one split.
TaskDataset build_generalization_task(ad::Rng& rng, const GeneralizationConfig& cfg = {});

/// Per-layer statistics of a conv-then-linear network: for weights and
/// biases the mean, std and the 0/25/50/75/100% quantiles, plus a presence
/// flag. Conv layers fill the first kStatConvSlots slots in order, the final
/// linear layer the last slot; absent layers are zero.
inline constexpr std::size_t kStatConvSlots = 5;
inline constexpr std::size_t kStatsPerLayer = 15;
std::vector<double> statnn_features(const zoo::Checkpoint& net);

}  // namespace ngraph::tasks
