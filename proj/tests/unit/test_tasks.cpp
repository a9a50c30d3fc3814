#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <map>
#include <set>

#include "ngraph/graphbuild/build.hpp"
#include "ngraph/netzoo/network.hpp"
#include "ngraph/netzoo/permutation.hpp"
#include "ngraph/tasks/baselines.hpp"
#include "ngraph/tasks/dataset.hpp"
#include "ngraph/tasks/generalization.hpp"
#include "ngraph/tasks/inr.hpp"
#include "ngraph/tasks/l2o.hpp"
#include "ngraph/tasks/metrics.hpp"
#include "../support/families.hpp"

namespace ngraph {
namespace {

namespace fs = std::filesystem;
using ad::Tensor;
using tasks::Split;
using tasks::TaskDataset;
using tasks::TaskError;
using zoo::Checkpoint;

/// Direct O(n^2) tau-b.
double brute_tau(const std::vector<double>& x, const std::vector<double>& y) {
  double conc = 0, disc = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        ++tx;
      } else if (dy == 0) {
        ++ty;
      } else if ((dx > 0) == (dy > 0)) {
        ++conc;
      } else {
        ++disc;
      }
    }
  return (conc - disc) / std::sqrt((conc + disc + tx) * (conc + disc + ty));
}

class TempDir {
public:
  TempDir() : path_(fs::temp_directory_path() / ("ngraph_tasks_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++))) {
    fs::remove_all(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string str() const { return path_.string(); }

private:
  static inline int counter_ = 0;
  fs::path path_;
};

/// Field-wise comparison so a failure names the first differing part.
void expect_same(const TaskDataset& a, const TaskDataset& b) {
  EXPECT_EQ(a.task, b.task);
  EXPECT_EQ(a.kind, b.kind);
  EXPECT_EQ(a.num_classes, b.num_classes);
  EXPECT_EQ(a.seed, b.seed);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto &x = a.records[i], &y = b.records[i];
    EXPECT_TRUE(x.graph == y.graph) << "graph " << i;
    EXPECT_TRUE(x.net == y.net) << "net " << i;
    EXPECT_EQ(x.label, y.label) << i;
    EXPECT_EQ(x.value, y.value) << i;
    EXPECT_EQ(x.edge_delta, y.edge_delta) << i;
    EXPECT_EQ(x.node_delta, y.node_delta) << i;
    EXPECT_EQ(x.lineage, y.lineage) << i;
    EXPECT_EQ(x.split, y.split) << i;
  }
}

tasks::InrTaskConfig tiny_inr() {
  tasks::InrTaskConfig c;
  c.train = 3;
  c.val = 2;
  c.test = 2;
  c.image_size = 8;
  c.inr.hidden = 6;
  c.inr.steps = 20;
  return c;
}

tasks::GeneralizationConfig tiny_gen() {
  tasks::GeneralizationConfig c;
  c.count = 12;
  c.val_fraction = 0.25;
  c.test_fraction = 0.25;
  c.zoo.image_size = 8;
  c.zoo.train_per_class = 8;
  c.zoo.test_per_class = 4;
  c.zoo.checkpoints_per_run = 3;
  c.zoo.min_steps = 2;
  c.zoo.max_steps = 6;
  c.zoo.batch = 8;
  return c;
}

// ---------------------------------------------------------------- metrics

TEST(KendallTau, SmallExamples) {
  EXPECT_NEAR(tasks::kendall_tau(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}), 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(tasks::kendall_tau(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}), -1.0);
  EXPECT_DOUBLE_EQ(tasks::kendall_tau(std::vector<double>{5, 6}, std::vector<double>{0, 1}), 1.0);
}

TEST(KendallTau, MatchesBruteForceWithTies) {
  ad::Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 2 + rng.index(40);
    std::size_t levels = 1 + rng.index(6);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = static_cast<double>(rng.index(levels));
    for (auto& v : y) v = static_cast<double>(rng.index(levels + 2));
    bool const_x = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
    bool const_y = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (const_x || const_y) {
      EXPECT_THROW(tasks::kendall_tau(x, y), TaskError);
      continue;
    }
    EXPECT_NEAR(tasks::kendall_tau(x, y), brute_tau(x, y), 1e-12) << "trial " << trial;
  }
}

TEST(KendallTau, RejectsBadInput) {
  EXPECT_THROW(tasks::kendall_tau(std::vector<double>{1, 2}, std::vector<double>{1}), TaskError);
  EXPECT_THROW(tasks::kendall_tau(std::vector<double>{1}, std::vector<double>{1}), TaskError);
  EXPECT_THROW(tasks::kendall_tau(std::vector<double>{1, NAN}, std::vector<double>{1, 2}), TaskError);
  EXPECT_THROW(tasks::kendall_tau(std::vector<double>{1, 1}, std::vector<double>{1, 2}), TaskError);
  EXPECT_EQ(tasks::kendall_tau_or_zero(std::vector<double>{3, 3, 3}, std::vector<double>{1, 2, 3}), 0.0);
  EXPECT_EQ(tasks::kendall_tau_or_zero(std::vector<double>{1, 2, 3}, std::vector<double>{0.5, 0.5, 0.5}), 0.0);
}

TEST(Metrics, AccuracyAndMse) {
  Tensor logits = Tensor::from({3, 2}, {0.1, 0.9, 2.0, -1.0, 0.0, 0.5});
  EXPECT_DOUBLE_EQ(tasks::accuracy(logits, std::vector<std::size_t>{1, 0, 0}), 2.0 / 3.0);
  EXPECT_THROW(tasks::accuracy(logits, std::vector<std::size_t>{1}), TaskError);
  EXPECT_DOUBLE_EQ(tasks::mean_squared_error(std::vector<double>{1, 2}, std::vector<double>{1, 4}), 2.0);
  EXPECT_THROW(tasks::mean_squared_error(std::vector<double>{}, std::vector<double>{}), TaskError);
}

// ---------------------------------------------------------------- datasets

TEST(InrTask, SplitsLabelsAndDeterminism) {
  ad::Rng a(5), b(5);
  TaskDataset d = tasks::build_inr_classification(a, tiny_inr());
  expect_same(d, tasks::build_inr_classification(b, tiny_inr()));
  EXPECT_EQ(d.task, "inr-cls");
  EXPECT_EQ(d.num_classes, 3u);
  EXPECT_EQ(d.indices(Split::train).size(), 3u);
  EXPECT_EQ(d.indices(Split::val).size(), 2u);
  EXPECT_EQ(d.indices(Split::test).size(), 2u);
  std::set<std::size_t> labels;
  for (auto i : d.indices(Split::train)) labels.insert(d.records[i].label);
  EXPECT_EQ(labels.size(), 3u);
  tasks::check_dataset(d);
}

TEST(InrTask, EmptyConfigGivesEmptyDataset) {
  ad::Rng rng(1);
  tasks::InrTaskConfig c = tiny_inr();
  c.train = c.val = c.test = 0;
  EXPECT_TRUE(tasks::build_inr_classification(rng, c).records.empty());
}

TEST(EditingTask, TrueDeltasNegateTheFunction) {
  ad::Rng rng(3);
  TaskDataset d = tasks::build_editing_task(rng, tiny_inr());
  ASSERT_FALSE(d.records.empty());
  Tensor coords = zoo::inr_coordinates(8, 8);
  for (const auto& r : d.records) {
    Checkpoint edited = tasks::apply_deltas(r.graph, r.edge_delta, r.node_delta);
    Tensor f = zoo::evaluate(r.net, coords), g = zoo::evaluate(edited, coords);
    for (std::size_t i = 0; i < f.size(); ++i) ASSERT_NEAR(g[i], -f[i], 1e-12);
    std::size_t last = r.graph.bands.size() - 1;
    for (std::size_t i = 0; i < r.graph.num_nodes; ++i)
      if (r.graph.node_band[i] != last) EXPECT_EQ(r.node_delta[i], 0.0);
    for (std::size_t e = 0; e < r.graph.num_edges(); ++e)
      if (r.graph.node_band[r.graph.edge_dst[e]] != last) EXPECT_EQ(r.edge_delta[e], 0.0);
  }
}

TEST(EditingTask, ZeroDeltasReproduceTheNetwork) {
  ad::Rng rng(4);
  TaskDataset d = tasks::build_editing_task(rng, tiny_inr());
  const auto& r = d.records.front();
  Checkpoint same = tasks::apply_deltas(r.graph, std::vector<double>(r.graph.num_edges()),
                                        std::vector<double>(r.graph.num_nodes));
  EXPECT_EQ(same.params, r.net.params);
  EXPECT_THROW(tasks::apply_deltas(r.graph, std::vector<double>(1), r.node_delta), TaskError);
}

TEST(Dataset, RoundTripIsExact) {
  ad::Rng rng(8);
  TaskDataset d = tasks::build_editing_task(rng, tiny_inr());
  d.seed = 0xFFFFFFFFFFFFFFF1ull;
  TempDir dir;
  tasks::save_dataset(d, dir.str());
  expect_same(tasks::load_dataset(dir.str()), d);
}

TEST(Dataset, ScalarRoundTripAndLineageSplits) {
  ad::Rng a(2), b(2);
  TaskDataset d = tasks::build_generalization_task(a, tiny_gen());
  expect_same(d, tasks::build_generalization_task(b, tiny_gen()));
  ASSERT_EQ(d.records.size(), 12u);
  std::map<std::size_t, Split> seen;
  for (const auto& r : d.records) {
    auto [it, fresh] = seen.emplace(r.lineage, r.split);
    EXPECT_EQ(it->second, r.split) << "lineage " << r.lineage;
    EXPECT_GE(r.value, 0.0);
    EXPECT_LE(r.value, 1.0);
  }
  EXPECT_FALSE(d.indices(Split::train).empty());
  EXPECT_FALSE(d.indices(Split::test).empty());
  TempDir dir;
  tasks::save_dataset(d, dir.str());
  expect_same(tasks::load_dataset(dir.str()), d);
}

TEST(GeneralizationTask, GraphsShareFeatureWidthsAndKeepSkips) {
  ad::Rng rng(13);
  tasks::GeneralizationConfig c = tiny_gen();
  c.zoo.skip_probability = 1.0;
  TaskDataset d = tasks::build_generalization_task(rng, c);
  bool residual = false;
  for (const auto& r : d.records) {
    EXPECT_EQ(r.graph.edge_dim, d.records[0].graph.edge_dim);
    EXPECT_EQ(r.graph.node_dim, d.records[0].graph.node_dim);
    for (auto k : r.graph.edge_kind) residual |= k == graph::EdgeKind::residual;
  }
  EXPECT_TRUE(residual);
}

TEST(Dataset, CheckRejectsInconsistencies) {
  ad::Rng rng(9);
  TaskDataset d = tasks::build_inr_classification(rng, tiny_inr());
  TaskDataset leak = d;
  leak.records[0].lineage = leak.records.back().lineage;
  EXPECT_THROW(tasks::check_dataset(leak), TaskError);
  TaskDataset label = d;
  label.records[0].label = 7;
  EXPECT_THROW(tasks::check_dataset(label), TaskError);
}

TEST(Dataset, LoadRejectsMissingAndCorrupt) {
  TempDir dir;
  EXPECT_ANY_THROW(tasks::load_dataset(dir.str()));
  ad::Rng rng(10);
  TaskDataset d = tasks::build_inr_classification(rng, tiny_inr());
  tasks::save_dataset(d, dir.str());
  {
    std::ofstream f(dir.str() + "/manifest.json", std::ios::trunc);
    f << "{\"version\": 1, \"records\": [";
  }
  EXPECT_ANY_THROW(tasks::load_dataset(dir.str()));
}

TEST(StatNN, FeatureLayout) {
  ad::Rng rng(6);
  TaskDataset d = tasks::build_generalization_task(rng, tiny_gen());
  for (const auto& r : d.records) {
    auto f = tasks::statnn_features(r.net);
    ASSERT_EQ(f.size(), (tasks::kStatConvSlots + 1) * tasks::kStatsPerLayer);
    EXPECT_EQ(f[(tasks::kStatConvSlots) * tasks::kStatsPerLayer], 1.0);  // final linear present
    EXPECT_EQ(f[0], 1.0);  // at least one conv
    for (double v : f) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Baselines, SeparableFeaturesAreLearned) {
  TaskDataset d;
  d.kind = tasks::TargetKind::class_label;
  d.num_classes = 2;
  std::vector<std::vector<double>> feats;
  ad::Rng rng(12);
  for (std::size_t i = 0; i < 60; ++i) {
    tasks::Record r;
    r.label = i % 2;
    r.lineage = i;
    r.split = i < 40 ? Split::train : i < 50 ? Split::val : Split::test;
    d.records.push_back(r);
    feats.push_back({(r.label ? 2.0 : -2.0) + rng.normal(0, 0.3), rng.normal()});
  }
  tasks::BaselineConfig cfg;
  cfg.epochs = 50;
  cfg.lr = 1e-2;
  EXPECT_EQ(tasks::train_vector_baseline(d, feats, cfg).test_metric, 1.0);
  EXPECT_EQ(tasks::nearest_neighbor_accuracy(d, feats), 1.0);
  feats.pop_back();
  EXPECT_THROW(tasks::train_vector_baseline(d, feats, cfg), TaskError);
}

TEST(Baselines, FlattenOrder) {
  Checkpoint net;
  net.spec = {zoo::linear_layer(2, 1, zoo::Activation::identity)};
  net.params.push_back({{1, 2}, {3}, {}, {}, {}});
  EXPECT_EQ(tasks::flatten_weights(net), (std::vector<double>{1, 2, 3}));
}

// ---------------------------------------------------------------- L2O

TEST(L2OState, MomentaFollowTheirRates) {
  tasks::L2OState s = tasks::init_l2o_state(2);
  std::vector<double> g{1.0, -2.0};
  tasks::update_l2o_state(s, g);
  EXPECT_DOUBLE_EQ(s.momentum[0][0], 0.5);
  EXPECT_DOUBLE_EQ(s.momentum[1][1], -0.2);
  tasks::update_l2o_state(s, g);
  EXPECT_DOUBLE_EQ(s.momentum[0][0], 0.75);
  EXPECT_EQ(s.step, 2u);
  EXPECT_THROW(tasks::update_l2o_state(s, std::vector<double>{1}), TaskError);
}

TEST(L2OState, FeatureRows) {
  tasks::L2OState s = tasks::init_l2o_state(2);
  std::vector<double> w{0.5, 0.0};
  auto f = tasks::l2o_feature_rows(w, s);
  ASSERT_EQ(f.size(), 2 * tasks::kL2OChannels);
  EXPECT_DOUBLE_EQ(f[0], std::log(0.5));
  EXPECT_EQ(f[1], 1.0);
  for (std::size_t c = 2; c < tasks::kL2OChannels; c += 2) {
    EXPECT_EQ(f[c], tasks::kLogFloor);  // no gradient yet
    EXPECT_EQ(f[c + 1], 0.0);
  }
  EXPECT_EQ(f[tasks::kL2OChannels], tasks::kLogFloor);
  EXPECT_EQ(tasks::log_sign(-1e-9)[1], -1.0);
  EXPECT_EQ(tasks::log_sign(-1e-9)[0], tasks::kLogFloor);
}

Checkpoint filled_like(const Checkpoint& net, ad::Rng& rng) {
  Checkpoint g = net;
  for (auto& p : g.params) {
    for (auto& w : p.weight) w = rng.normal();
    for (auto& b : p.bias) b = rng.normal();
  }
  return g;
}

TEST(L2OFeatures, PlacementAndEquivariance) {
  ad::Rng rng(21);
  tasks::Optimizee task = tasks::make_optimizee({{3, 5, 4, 2}, zoo::Activation::tanh, 8, 1});
  Checkpoint net = tasks::init_optimizee(task, 4);
  Checkpoint grads = filled_like(net, rng);

  tasks::L2OState s = tasks::init_l2o_state(tasks::flatten_weights(net).size());
  tasks::update_l2o_state(s, tasks::flatten_weights(grads));
  graph::NeuralGraph g = tasks::extract_l2o_features(s, net);
  EXPECT_EQ(g.node_dim, tasks::kL2OChannels);
  EXPECT_EQ(g.edge_dim, tasks::kL2OChannels);

  auto rows = tasks::parameter_rows(g, net);
  auto flat = tasks::flatten_weights(net);
  auto feats = tasks::l2o_feature_rows(flat, s);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto row = rows[k] < g.num_edges() ? g.edge_row(rows[k]) : g.node_row(rows[k] - g.num_edges());
    for (std::size_t c = 0; c < tasks::kL2OChannels; ++c) ASSERT_EQ(row[c], feats[k * tasks::kL2OChannels + c]);
  }

  auto perm = zoo::random_hidden_permutation(net, rng);
  Checkpoint pnet = zoo::permute(net, perm), pgrads = zoo::permute(grads, perm);
  tasks::L2OState ps = tasks::init_l2o_state(flat.size());
  tasks::update_l2o_state(ps, tasks::flatten_weights(pgrads));
  graph::NeuralGraph expected = graph::permute_graph(g, graph::node_permutation(g, perm));
  graph::NeuralGraph got = tasks::extract_l2o_features(ps, pnet);
  EXPECT_EQ(got.node_features, expected.node_features);
  EXPECT_EQ(got.edge_features, expected.edge_features);
  EXPECT_EQ(got.edge_src, expected.edge_src);
}

TEST(L2OFeatures, RejectsNonDenseNetworks) {
  ad::Rng rng(1);
  auto fam = testkit::random_cnn(rng);
  tasks::L2OState s = tasks::init_l2o_state(tasks::flatten_weights(fam.net).size());
  EXPECT_THROW(tasks::extract_l2o_features(s, fam.net), TaskError);
}

TEST(Optimizee, DeterministicAndLearnable) {
  tasks::OptimizeeConfig c;
  tasks::Optimizee a = tasks::make_optimizee(c), b = tasks::make_optimizee(c);
  EXPECT_EQ(a.y.to_vector(), b.y.to_vector());
  Checkpoint net = tasks::init_optimizee(a, 3);
  EXPECT_EQ(net.params, tasks::init_optimizee(a, 3).params);
  auto losses = tasks::run_sgd(a, net, 0.1, 50);
  ASSERT_EQ(losses.size(), 51u);
  EXPECT_DOUBLE_EQ(losses.front(), tasks::optimizee_loss(a, net));
  EXPECT_LT(losses.back(), losses.front());
  EXPECT_THROW(tasks::make_optimizee({{2}, zoo::Activation::tanh, 8, 0}), TaskError);
}

class L2OKinds : public ::testing::TestWithParam<tasks::L2OKind> {};

TEST_P(L2OKinds, UntrainedOptimizerLeavesParametersInPlace) {
  tasks::Optimizee task = tasks::make_optimizee({{2, 4, 1}, zoo::Activation::tanh, 16, 2});
  tasks::LearnedOptimizer opt = tasks::init_learned_optimizer(tasks::default_l2o_config(GetParam()), task);
  auto losses = tasks::run_learned(opt, task, tasks::init_optimizee(task, 1), 5);
  ASSERT_EQ(losses.size(), 6u);
  for (double l : losses) EXPECT_EQ(l, losses.front());
}

TEST_P(L2OKinds, MetaTrainingUpdatesEveryPart) {
  tasks::Optimizee task = tasks::make_optimizee({{2, 4, 1}, zoo::Activation::tanh, 16, 2});
  tasks::L2OConfig cfg = tasks::default_l2o_config(GetParam());
  cfg.horizon = 4;
  cfg.unroll = 2;
  cfg.outer_steps = 3;
  cfg.hidden = 8;
  tasks::L2OReport report;
  tasks::LearnedOptimizer init = tasks::init_learned_optimizer(cfg, task);
  tasks::LearnedOptimizer trained = tasks::l2o_train(cfg, task, &report);
  EXPECT_EQ(report.outer_loss.size(), 3u);
  EXPECT_EQ(report.aborted, 0u);
  for (double l : report.outer_loss) EXPECT_TRUE(std::isfinite(l));
  EXPECT_NE(trained.ff.get("ff.1.w").to_vector(), init.ff.get("ff.1.w").to_vector());
  if (GetParam() == tasks::L2OKind::ng_gnn) {
    ASSERT_TRUE(trained.encoder);
    EXPECT_NE(trained.encoder->params.get("enc.node.w").to_vector(), init.encoder->params.get("enc.node.w").to_vector());
  }
  // determinism
  tasks::L2OReport again;
  tasks::l2o_train(cfg, task, &again);
  EXPECT_EQ(again.outer_loss, report.outer_loss);
}

INSTANTIATE_TEST_SUITE_P(Kinds, L2OKinds, ::testing::Values(tasks::L2OKind::ff, tasks::L2OKind::ng_gnn),
                         [](const auto& info) { return info.param == tasks::L2OKind::ff ? "ff" : "ng_gnn"; });

TEST(L2O, KindNamesAndErrors) {
  EXPECT_EQ(tasks::parse_l2o_kind("ng-gnn"), tasks::L2OKind::ng_gnn);
  EXPECT_EQ(tasks::to_string(tasks::L2OKind::ff), "ff");
  EXPECT_THROW(tasks::parse_l2o_kind("adam"), TaskError);
  tasks::Optimizee task = tasks::make_optimizee({});
  tasks::L2OConfig cfg = tasks::default_l2o_config(tasks::L2OKind::ff);
  cfg.unroll = 0;
  EXPECT_THROW(tasks::init_learned_optimizer(cfg, task), TaskError);
  EXPECT_THROW(tasks::tune_sgd_lr(task, {}, 5), TaskError);
}

TEST(L2O, TunedLearningRateComesFromTheGrid) {
  tasks::Optimizee task = tasks::make_optimizee({{2, 4, 1}, zoo::Activation::tanh, 16, 2});
  std::vector<std::uint64_t> seeds{1, 2};
  double lr = tasks::tune_sgd_lr(task, seeds, 20);
  std::set<double> grid{1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0};
  EXPECT_TRUE(grid.count(lr));
}

}  // namespace
}  // namespace ngraph
