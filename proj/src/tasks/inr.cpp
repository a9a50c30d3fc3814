#include "ngraph/tasks/inr.hpp"

#include "ngraph/graphbuild/build.hpp"
#include "ngraph/netzoo/network.hpp"
#include "ngraph/netzoo/toy_images.hpp"

namespace ngraph::tasks {

namespace {

Split split_of(std::size_t i, const InrTaskConfig& cfg) {
  if (i < cfg.train) return Split::train;
  if (i < cfg.train + cfg.val) return Split::val;
  return Split::test;
}

void check_config(const InrTaskConfig& cfg) {
  if (cfg.classes == 0 || cfg.classes > zoo::kNumShapeFamilies)
    throw TaskError("INR tasks support 1 to " + std::to_string(zoo::kNumShapeFamilies) + " classes, got " +
                    std::to_string(cfg.classes));
  if (cfg.image_size < 2) throw TaskError("INR images need at least 2x2 pixels");
}

/// One fitted INR per record; the record's stream depends only on (seed, i).
template <typename Fill>
TaskDataset build_inrs(ad::Rng& rng, const InrTaskConfig& cfg, std::string task, TargetKind kind, Fill fill) {
  check_config(cfg);
  TaskDataset d;
  d.task = std::move(task);
  d.kind = kind;
  d.num_classes = kind == TargetKind::class_label ? cfg.classes : 0;
  d.seed = rng.next_u64();
  ad::Rng base(d.seed);
  std::size_t total = cfg.train + cfg.val + cfg.test;
  for (std::size_t i = 0; i < total; ++i) {
    ad::Rng r = base.derive(i);
    std::size_t family = kind == TargetKind::class_label ? i % cfg.classes : r.index(cfg.classes);
    auto pixels = zoo::render_shape(static_cast<zoo::ShapeFamily>(family), cfg.image_size, r);
    ad::Tensor image = ad::Tensor::from({cfg.image_size, cfg.image_size}, std::move(pixels));
    Record rec;
    rec.net = zoo::fit_inr(image, r, cfg.inr);
    rec.net.metadata["family"] = std::to_string(family);
    rec.graph = graph::build_graph(rec.net);
    if (kind == TargetKind::class_label) rec.label = family;
    rec.lineage = i;
    rec.split = split_of(i, cfg);
    fill(rec);
    d.records.push_back(std::move(rec));
  }
  return d;
}

void require_dense_raw(const graph::NeuralGraph& g) {
  if (g.layout.normalized || g.layout.direction || g.layout.base_edge_dim != 1)
    throw TaskError("parameter deltas apply to raw dense graphs only");
}

}  // namespace

TaskDataset build_inr_classification(ad::Rng& rng, const InrTaskConfig& cfg) {
  return build_inrs(rng, cfg, "inr-cls", TargetKind::class_label, [](Record&) {});
}

TaskDataset build_editing_task(ad::Rng& rng, const InrTaskConfig& cfg) {
  return build_inrs(rng, cfg, "edit", TargetKind::deltas, [](Record& rec) {
    const graph::NeuralGraph& g = rec.graph;
    require_dense_raw(g);
    std::size_t last = g.bands.size() - 1, slot = g.layout.linear_slot;
    rec.edge_delta.assign(g.num_edges(), 0.0);
    rec.node_delta.assign(g.num_nodes, 0.0);
    for (std::size_t e = 0; e < g.num_edges(); ++e)
      if (g.edge_kind[e] == graph::EdgeKind::weight && g.node_band[g.edge_dst[e]] == last)
        rec.edge_delta[e] = -2.0 * g.edge_row(e)[slot];
    for (std::size_t i = 0; i < g.num_nodes; ++i)
      if (g.node_band[i] == last) rec.node_delta[i] = -2.0 * g.node_row(i)[0];
  });
}

zoo::Checkpoint apply_deltas(const graph::NeuralGraph& g, std::span<const double> edge_delta,
                             std::span<const double> node_delta) {
  require_dense_raw(g);
  if (edge_delta.size() != g.num_edges() || node_delta.size() != g.num_nodes)
    throw TaskError("delta sizes (" + std::to_string(edge_delta.size()) + ", " + std::to_string(node_delta.size()) +
                    ") do not match the graph (" + std::to_string(g.num_edges()) + ", " +
                    std::to_string(g.num_nodes) + ")");
  graph::NeuralGraph edited = g;
  for (std::size_t e = 0; e < g.num_edges(); ++e)
    if (g.edge_kind[e] == graph::EdgeKind::weight) edited.edge_row(e)[g.layout.linear_slot] += edge_delta[e];
  for (std::size_t i = 0; i < g.num_nodes; ++i)
    if (g.node_role[i] != graph::IoRole::input) edited.node_features[i * g.node_dim] += node_delta[i];
  return graph::graph_to_network(edited);
}

double edit_function_error(const Record& r, std::span<const double> edge_delta, std::span<const double> node_delta,
                           std::size_t grid) {
  ad::Tensor coords = zoo::inr_coordinates(grid, grid);
  ad::Tensor f = zoo::evaluate(r.net, coords);
  ad::Tensor g = zoo::evaluate(apply_deltas(r.graph, edge_delta, node_delta), coords);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += (g[i] + f[i]) * (g[i] + f[i]);
  return s / static_cast<double>(f.size());
}

}  // namespace ngraph::tasks
