#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ngraph/graphbuild/graph.hpp"
#include "ngraph/netzoo/checkpoint.hpp"
#include "ngraph/tasks/metrics.hpp"

namespace ngraph::tasks {

enum class TargetKind { class_label, scalar, deltas };
enum class Split : std::uint8_t { train, val, test };

std::string_view to_string(TargetKind k);
std::string_view to_string(Split s);
TargetKind parse_target_kind(std::string_view s);
Split parse_split(std::string_view s);

struct Record {
  graph::NeuralGraph graph;
  zoo::Checkpoint net;  // source network the graph was built from
  std::size_t label = 0;               // class_label
  double value = 0.0;                  // scalar
  std::vector<double> edge_delta;      // deltas: one per graph edge
  std::vector<double> node_delta;      // deltas: one per graph node
  std::size_t lineage = 0;             // training run the network came from
  Split split = Split::train;

  bool operator==(const Record&) const = default;
};

struct TaskDataset {
  std::string task;
  TargetKind kind = TargetKind::class_label;
  std::size_t num_classes = 0;
  std::uint64_t seed = 0;
  std::vector<Record> records;

  std::vector<std::size_t> indices(Split s) const;
  bool operator==(const TaskDataset&) const = default;
};

/// Throws TaskError when a lineage spans two splits, a label is out of range
/// or delta targets do not match their graph.
void check_dataset(const TaskDataset& d);

/// Directory archive: graphs/NNNNN.ngraph, nets/NNNNN.json and manifest.json
/// {version, task, target_kind, num_classes, seed, records}. Creates `dir`.
void save_dataset(const TaskDataset& d, const std::string& dir);
TaskDataset load_dataset(const std::string& dir);

}  // namespace ngraph::tasks
