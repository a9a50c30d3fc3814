#include "ngraph/tasks/generalization.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ngraph/graphbuild/build.hpp"

namespace ngraph::tasks {

namespace {

/// mean, std, then quantiles 0, .25, .5, .75, 1 (linear interpolation)
void append_stats(std::vector<double> v, std::vector<double>& out) {
  if (v.empty()) {
    out.insert(out.end(), 7, 0.0);
    return;
  }
  double n = static_cast<double>(v.size()), mean = 0.0, var = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  for (double x : v) var += (x - mean) * (x - mean);
  out.push_back(mean);
  out.push_back(std::sqrt(var / n));
  std::sort(v.begin(), v.end());
  for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    double pos = q * (n - 1.0);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    out.push_back(v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]));
  }
}

}  // namespace

TaskDataset build_generalization_task(ad::Rng& rng, const GeneralizationConfig& cfg) {
  if (cfg.val_fraction < 0 || cfg.test_fraction < 0 || cfg.val_fraction + cfg.test_fraction >= 1.0)
    throw TaskError("split fractions must be non-negative and leave room for training runs");
  TaskDataset d;
  d.task = "gen-pred";
  d.kind = TargetKind::scalar;
  d.seed = rng.next_u64();
  ad::Rng base(d.seed);
  ad::Rng zoo_rng = base.derive(0);
  auto members = zoo::generate_wild_park_mini(zoo_rng, cfg.count, cfg.zoo);

  // shuffle the runs, then hand out test, val and train runs by fraction
  std::vector<std::size_t> runs;
  for (const auto& m : members)
    if (runs.empty() || runs.back() != m.lineage) runs.push_back(m.lineage);
  std::sort(runs.begin(), runs.end());
  runs.erase(std::unique(runs.begin(), runs.end()), runs.end());
  ad::Rng split_rng = base.derive(1);
  split_rng.shuffle(runs);
  auto n_test = static_cast<std::size_t>(std::round(cfg.test_fraction * static_cast<double>(runs.size())));
  auto n_val = static_cast<std::size_t>(std::round(cfg.val_fraction * static_cast<double>(runs.size())));
  std::map<std::size_t, Split> split_of;
  for (std::size_t i = 0; i < runs.size(); ++i)
    split_of[runs[i]] = i < n_test ? Split::test : i < n_test + n_val ? Split::val : Split::train;

  // one kernel window for the whole zoo so every graph has the same edge width
  graph::GraphOptions opts;
  opts.max_kernel = zoo::KernelSize{zoo::kWildParkMaxKernel, zoo::kWildParkMaxKernel};
  for (auto& m : members) {
    Record r;
    r.graph = graph::to_graph(m.net, opts);
    r.value = m.accuracy;
    r.lineage = m.lineage;
    r.split = split_of.at(m.lineage);
    r.net = std::move(m.net);
    d.records.push_back(std::move(r));
  }
  check_dataset(d);
  return d;
}

std::vector<double> statnn_features(const zoo::Checkpoint& net) {
  std::vector<std::vector<double>> slots(kStatConvSlots + 1);
  std::size_t conv = 0;
  for (std::size_t l = 0; l < net.spec.size(); ++l) {
    const auto& s = net.spec[l];
    if (s.kind == zoo::LayerKind::flatten) continue;
    bool last = l + 1 == net.spec.size();
    std::size_t slot;
    if (s.kind == zoo::LayerKind::conv2d && conv < kStatConvSlots) {
      slot = conv++;
    } else if (last && s.kind == zoo::LayerKind::linear) {
      slot = kStatConvSlots;
    } else {
      throw TaskError("statistics features expect up to " + std::to_string(kStatConvSlots) +
                      " conv layers and a final linear layer");
    }
    std::vector<double>& f = slots[slot];
    f.push_back(1.0);
    append_stats(net.params[l].weight, f);
    append_stats(net.params[l].bias, f);
  }
  std::vector<double> out;
  for (auto& f : slots) {
    if (f.empty()) f.assign(kStatsPerLayer, 0.0);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

}  // namespace ngraph::tasks
