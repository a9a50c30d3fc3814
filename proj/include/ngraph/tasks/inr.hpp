#pragma once

#include "ngraph/autodiff/rng.hpp"
#include "ngraph/netzoo/zoo.hpp"
#include "ngraph/tasks/dataset.hpp"

namespace ngraph::tasks {

/// Labels are assigned round-robin over the shape families, so every split
/// stays balanced up to one record per class.
struct InrTaskConfig {
  std::size_t classes = 3;
  std::size_t train = 150;
  std::size_t val = 30;
  std::size_t test = 50;
  std::size_t image_size = 16;
  zoo::InrConfig inr;
};

/// One INR per synthetic image, labelled by its shape family.
TaskDataset build_inr_classification(ad::Rng& rng, const InrTaskConfig& cfg = {});

/// INRs of random shapes whose targets are the parameter deltas that negate
/// the represented function: -2 W and -2 b on the last layer, zero
/// elsewhere. `classes` only selects which families are drawn.
TaskDataset build_editing_task(ad::Rng& rng, const InrTaskConfig& cfg = {});

/// Adds per-edge deltas to the weight slot and per-node deltas to the bias
/// channel of a raw (unnormalized, forward-only) graph and converts back.
zoo::Checkpoint apply_deltas(const graph::NeuralGraph& g, std::span<const double> edge_delta,
                             std::span<const double> node_delta);

/// Mean squared gap between the edited network and the negated original on
/// a grid x grid coordinate lattice.
double edit_function_error(const Record& r, std::span<const double> edge_delta, std::span<const double> node_delta,
                           std::size_t grid = 16);

}  // namespace ngraph::tasks
