#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "ngraph/graphbuild/build.hpp"
#include "ngraph/graphbuild/features.hpp"
#include "ngraph/graphbuild/forward.hpp"
#include "ngraph/graphbuild/io.hpp"
#include "ngraph/netzoo/network.hpp"
#include "ngraph/netzoo/permutation.hpp"
#include "ngraph/netzoo/zoo.hpp"
#include "ngraph/util/codec.hpp"
#include "../support/families.hpp"
#include "../support/graphs.hpp"

using namespace ngraph;
using namespace ngraph::graph;
using ad::Tensor;
using zoo::Checkpoint;
using zoo::LayerParams;
namespace testkit = ngraph::testkit;
using testkit::Family;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

LayerParams params(std::vector<double> w, std::vector<double> b) {
  LayerParams p;
  p.weight = std::move(w);
  p.bias = std::move(b);
  return p;
}

Checkpoint mlp_231() {
  Checkpoint net;
  net.spec = {zoo::linear_layer(2, 3, Activation::relu), zoo::linear_layer(3, 1, Activation::identity)};
  net.params = {params({1, -2, 0.5, 3, -1, 2}, {0.1, 0.2, 0.3}), params({1, -1, 2}, {0.4})};
  return net;
}

std::vector<Family> executable_families() { return {Family::mlp, Family::cnn, Family::residual, Family::norm}; }

std::size_t count_kind(const NeuralGraph& g, EdgeKind k) {
  return static_cast<std::size_t>(std::count(g.edge_kind.begin(), g.edge_kind.end(), k));
}

std::vector<double> node_channels(const NeuralGraph& g, std::size_t node, std::size_t from) {
  auto row = g.node_row(node);
  return {row.begin() + static_cast<std::ptrdiff_t>(from), row.end()};
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "ngraph_graphbuild_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(MlpToGraph, SmallExampleNodesEdgesAndBiases) {
  NeuralGraph g = mlp_to_graph(mlp_231());
  EXPECT_EQ(g.num_nodes, 6u);
  EXPECT_EQ(g.num_edges(), 9u);
  EXPECT_EQ(g.node_dim, 1u);
  EXPECT_EQ(g.edge_dim, 1u);
  EXPECT_EQ(g.node_features, (std::vector<double>{0, 0, 0.1, 0.2, 0.3, 0.4}));
  EXPECT_EQ(g.node_role[0], IoRole::input);
  EXPECT_EQ(g.node_role[3], IoRole::hidden);
  EXPECT_EQ(g.node_role[5], IoRole::output);
}

TEST(MlpToGraph, EdgeFeaturesAreTheWeights) {
  NeuralGraph g = mlp_to_graph(mlp_231());
  auto dense = dense_edges(g);
  // W1[o][j] sits at E[j][2 + o]
  EXPECT_EQ(dense[0 * 6 + 2], 1.0);
  EXPECT_EQ(dense[1 * 6 + 2], -2.0);
  EXPECT_EQ(dense[1 * 6 + 4], 2.0);
  EXPECT_EQ(dense[3 * 6 + 5], -1.0);
}

TEST(MlpToGraph, SingleWeight) {
  Checkpoint net;
  net.spec = {zoo::linear_layer(1, 1, Activation::identity)};
  net.params = {params({5}, {0})};
  NeuralGraph g = mlp_to_graph(net);
  EXPECT_EQ(g.num_nodes, 2u);
  ASSERT_EQ(g.num_edges(), 1u);
  EXPECT_EQ(g.edge_features[0], 5.0);
}

TEST(MlpToGraph, NonzeroBlocksAreTheFirstOffDiagonal) {
  ad::Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    Checkpoint net = testkit::random_mlp(rng).net;
    NeuralGraph g = mlp_to_graph(net);
    std::size_t expected = 0;
    for (const auto& s : net.spec) expected += s.in_dim * s.out_dim;
    EXPECT_EQ(g.num_edges(), expected);
    for (std::size_t e = 0; e < g.num_edges(); ++e) EXPECT_EQ(g.node_band[g.edge_dst[e]], g.node_band[g.edge_src[e]] + 1);
  }
}

TEST(MlpToGraph, RejectsConvolutions) {
  Checkpoint net;
  net.spec = {zoo::conv_layer(1, 1, {1, 1}, Activation::identity)};
  net.params = {params({1}, {0})};
  EXPECT_THROW(mlp_to_graph(net), GraphError);
}

TEST(CnnToGraph, KernelIsZeroPaddedAndCentered) {
  std::vector<double> k{0.1, -0.2, 0.1, 0.1, -0.3, 0.2, 0.2, -0.2, 0.3};
  Checkpoint net;
  net.spec = {zoo::conv_layer(1, 1, {3, 3}, Activation::identity)};
  net.params = {params(k, {0})};
  NeuralGraph g = cnn_to_graph(net, {5, 5}, LinearMode::as_1x1_conv, FlattenMode::adaptive);
  ASSERT_EQ(g.edge_dim, 25u);
  ASSERT_EQ(g.num_edges(), 1u);
  auto f = g.edge_row(0);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 5; ++c) {
      bool inner = r >= 1 && r <= 3 && c >= 1 && c <= 3;
      double want = inner ? k[(r - 1) * 3 + (c - 1)] : 0.0;
      EXPECT_EQ(f[r * 5 + c], want) << r << "," << c;
    }
}

TEST(CnnToGraph, NonSquareKernelPlacement) {
  // 1 wide, 3 high inside a 3x3 window: middle column
  Checkpoint net;
  net.spec = {zoo::conv_layer(1, 1, {1, 3}, Activation::identity)};
  net.params = {params({1, 2, 3}, {0})};
  NeuralGraph g = cnn_to_graph(net, {3, 3}, LinearMode::as_1x1_conv, FlattenMode::adaptive);
  auto f = g.edge_row(0);
  EXPECT_EQ((std::vector<double>(f.begin(), f.end())), (std::vector<double>{0, 1, 0, 0, 2, 0, 0, 3, 0}));
}

TEST(CnnToGraph, OneByOneKernelsReduceToMlpLayout) {
  Checkpoint conv;
  conv.spec = {zoo::conv_layer(2, 3, {1, 1}, Activation::relu), zoo::conv_layer(3, 1, {1, 1}, Activation::identity)};
  Checkpoint mlp = mlp_231();
  conv.params = mlp.params;
  NeuralGraph a = cnn_to_graph(conv, {1, 1}, LinearMode::as_mlp, FlattenMode::adaptive);
  NeuralGraph b = mlp_to_graph(mlp);
  EXPECT_EQ(a.node_features, b.node_features);
  EXPECT_EQ(a.edge_src, b.edge_src);
  EXPECT_EQ(a.edge_dst, b.edge_dst);
  EXPECT_EQ(a.edge_features, b.edge_features);
  EXPECT_EQ(a.node_activation, b.node_activation);
}

TEST(CnnToGraph, LinearWeightsUseTheCenterSlotAsConv) {
  Checkpoint net;
  net.spec = {zoo::conv_layer(1, 2, {3, 3}, Activation::relu), zoo::linear_layer(2, 1, Activation::identity)};
  ad::Rng rng(5);
  net = testkit::randomize(net.spec, rng);
  NeuralGraph conv = cnn_to_graph(net, {3, 3}, LinearMode::as_1x1_conv, FlattenMode::adaptive);
  NeuralGraph mlp = cnn_to_graph(net, {3, 3}, LinearMode::as_mlp, FlattenMode::adaptive);
  std::size_t out = conv.bands.back().first;
  for (std::size_t e = 0; e < conv.num_edges(); ++e) {
    if (conv.edge_dst[e] != out) continue;
    auto f = conv.edge_row(e);
    for (std::size_t k = 0; k < 9; ++k) EXPECT_EQ(f[k] != 0.0, k == 4);
    auto h = mlp.edge_row(e);
    EXPECT_EQ(h[0], f[4]);
  }
}

TEST(CnnToGraph, KernelLargerThanMaximumIsRejected) {
  Checkpoint net;
  net.spec = {zoo::conv_layer(1, 1, {5, 5}, Activation::identity)};
  net.params = {params(std::vector<double>(25, 1.0), {0})};
  EXPECT_THROW(cnn_to_graph(net, {3, 3}, LinearMode::as_1x1_conv, FlattenMode::adaptive), GraphError);
}

TEST(CnnToGraph, FlattenModesNeedAFlattenLayer) {
  Checkpoint net;
  net.spec = {zoo::conv_layer(1, 2, {3, 3}, Activation::relu), zoo::linear_layer(2, 1, Activation::identity)};
  ad::Rng rng(1);
  net = testkit::randomize(net.spec, rng);
  EXPECT_THROW(cnn_to_graph(net, {3, 3}, LinearMode::as_1x1_conv, FlattenMode::repeat_nodes), GraphError);
  EXPECT_THROW(cnn_to_graph(net, {3, 3}, LinearMode::as_1x1_conv, FlattenMode::virtual_layer), GraphError);
}

namespace {

Checkpoint flatten_net(ad::Rng& rng) {
  std::vector<zoo::LayerSpec> spec{zoo::conv_layer(1, 2, {3, 3}, Activation::tanh, true)};
  zoo::LayerSpec f;
  f.kind = zoo::LayerKind::flatten;
  f.in_dim = 2;
  f.out_dim = 2 * 2 * 2;
  f.spatial_height = 2;
  f.spatial_width = 2;
  spec.push_back(f);
  spec.push_back(zoo::linear_layer(8, 3, Activation::identity));
  return testkit::randomize(spec, rng);
}

}  // namespace

TEST(CnnToGraph, RepeatNodesCopiesLastConvPerLocation) {
  ad::Rng rng(2);
  Checkpoint net = flatten_net(rng);
  NeuralGraph g = cnn_to_graph(net, {3, 3}, LinearMode::as_1x1_conv, FlattenMode::repeat_nodes);
  ASSERT_EQ(g.bands.size(), 3u);
  EXPECT_EQ(g.bands[1].spatial, 4u);
  EXPECT_EQ(g.num_nodes, 1u + 8u + 3u);
  // 1 input channel -> 2 channels x 4 copies, then 8 -> 3
  EXPECT_EQ(g.num_edges(), 8u + 24u);
  // copies have distinct positional slots
  EXPECT_NE(g.node_position[g.bands[1].first], g.node_position[g.bands[1].first + 1]);
}

TEST(CnnToGraph, VirtualLayerLinksChannelsWithUnitEdges) {
  ad::Rng rng(2);
  Checkpoint net = flatten_net(rng);
  NeuralGraph g = cnn_to_graph(net, {3, 3}, LinearMode::as_1x1_conv, FlattenMode::virtual_layer);
  ASSERT_EQ(g.bands.size(), 4u);
  EXPECT_EQ(g.bands[2].kind, BandKind::virtual_layer);
  EXPECT_EQ(count_kind(g, EdgeKind::virtual_link), 8u);
  for (std::size_t e = 0; e < g.num_edges(); ++e)
    if (g.edge_kind[e] == EdgeKind::virtual_link) {
      EXPECT_EQ(g.edge_row(e)[g.layout.scalar_slot], 1.0);
      EXPECT_EQ(g.node_index[g.edge_src[e]], g.node_index[g.edge_dst[e]]);
    }
}

TEST(NormToGraph, Arithmetic) {
  std::vector<double> gamma{2, 3}, beta{1, -1};
  NeuralGraph g = norm_to_graph(gamma, beta);
  Tensor y = forward_on_graph(g, Tensor::vector({1, 1}));
  EXPECT_EQ(y.to_vector(), (std::vector<double>{3, 2}));
}

TEST(NormToGraph, IdentityFragmentPreservesInputs) {
  std::vector<double> gamma(4, 1.0), beta(4, 0.0);
  NeuralGraph g = norm_to_graph(gamma, beta);
  ad::Rng rng(4);
  Tensor x = testkit::random_input({6, 4}, rng);
  EXPECT_EQ(forward_on_graph(g, x).to_vector(), x.to_vector());
}

TEST(NormToGraph, OnlyDiagonalEdges) {
  std::vector<double> gamma{0.5, 1.5, 2.5}, beta{0, 0, 0};
  NeuralGraph g = norm_to_graph(gamma, beta, {3, 3});
  ASSERT_EQ(g.num_edges(), 3u);
  EXPECT_EQ(g.edge_dim, 9u);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(g.edge_dst[e], g.edge_src[e] + 3);
    EXPECT_EQ(g.edge_row(e)[4], gamma[g.edge_src[e]]);
  }
}

TEST(NormToGraph, LengthMismatch) {
  std::vector<double> gamma{1, 2}, beta{0};
  EXPECT_THROW(norm_to_graph(gamma, beta), GraphError);
}

namespace {

Checkpoint attention_net(ad::Rng& rng) { return testkit::randomize({zoo::attention_layer(2, 1, 2)}, rng); }

}  // namespace

TEST(TransformerToGraph, NodeCountAndChannels) {
  ad::Rng rng(6);
  Checkpoint net = attention_net(rng);
  NeuralGraph g = transformer_to_graph(net);
  EXPECT_EQ(g.num_nodes, 6u);
  EXPECT_EQ(g.edge_dim, 3u);
  std::size_t qkv = 0;
  for (std::size_t e = 0; e < g.num_edges(); ++e)
    if (g.bands[g.node_band[g.edge_dst[e]]].kind == BandKind::heads) {
      ++qkv;
      std::size_t r = g.node_index[g.edge_dst[e]], c = g.node_index[g.edge_src[e]];
      auto f = g.edge_row(e);
      EXPECT_EQ(f[0], net.params[0].query[r * 2 + c]);
      EXPECT_EQ(f[1], net.params[0].key[r * 2 + c]);
      EXPECT_EQ(f[2], net.params[0].value[r * 2 + c]);
    }
  EXPECT_EQ(qkv, 4u);
}

TEST(TransformerToGraph, ZeroQueryAndKeyLeaveValueChannel) {
  ad::Rng rng(7);
  Checkpoint net = attention_net(rng);
  Checkpoint zeroed = net;
  std::fill(zeroed.params[0].query.begin(), zeroed.params[0].query.end(), 0.0);
  std::fill(zeroed.params[0].key.begin(), zeroed.params[0].key.end(), 0.0);
  NeuralGraph a = transformer_to_graph(net), b = transformer_to_graph(zeroed);
  ASSERT_EQ(a.num_edges(), b.num_edges());
  for (std::size_t e = 0; e < a.num_edges(); ++e) EXPECT_EQ(a.edge_row(e)[2], b.edge_row(e)[2]);
}

TEST(TransformerToGraph, RoundTripRecoversProjections) {
  ad::Rng rng(8);
  for (int t = 0; t < 5; ++t) {
    Checkpoint net = testkit::random_transformer(rng).net;
    EXPECT_EQ(graph_to_network(transformer_to_graph(net)), net);
  }
}

TEST(TransformerToGraph, RejectsNetsWithoutAttention) { EXPECT_THROW(transformer_to_graph(mlp_231()), GraphError); }

TEST(ResidualEdges, OneSkipOfWidthFour) {
  ad::Rng rng(9);
  std::vector<zoo::LayerSpec> spec{zoo::linear_layer(4, 4, Activation::relu), zoo::linear_layer(4, 4, Activation::relu),
                                   zoo::linear_layer(4, 4, Activation::identity)};
  spec[2].residual_source = 1;
  Checkpoint net = testkit::randomize(spec, rng);
  NeuralGraph g = to_graph(net);
  EXPECT_EQ(count_kind(g, EdgeKind::residual), 4u);
  for (std::size_t e = 0; e < g.num_edges(); ++e)
    if (g.edge_kind[e] == EdgeKind::residual) {
      EXPECT_EQ(g.edge_row(e)[g.layout.scalar_slot], 1.0);
      EXPECT_EQ(g.node_index[g.edge_src[e]], g.node_index[g.edge_dst[e]]);
      EXPECT_EQ(g.node_band[g.edge_src[e]], 1u);
      EXPECT_EQ(g.node_band[g.edge_dst[e]], 3u);
    }
}

TEST(ResidualEdges, MinimumChannelRule) {
  ad::Rng rng(10);
  std::vector<zoo::LayerSpec> spec{zoo::linear_layer(3, 5, Activation::relu), zoo::linear_layer(5, 2, Activation::relu),
                                   zoo::linear_layer(2, 4, Activation::identity)};
  spec[2].residual_source = 1;
  Checkpoint net = testkit::randomize(spec, rng);
  EXPECT_EQ(count_kind(to_graph(net), EdgeKind::residual), 4u);
}

TEST(ResidualEdges, PlainMlpUnchanged) {
  Checkpoint net = mlp_231();
  NeuralGraph g = build_graph(net);
  EXPECT_EQ(add_residual_edges(g, net), g);
}

TEST(ResidualEdges, AddingTwiceIsRejected) {
  ad::Rng rng(11);
  Checkpoint net = testkit::random_mlp(rng, true).net;
  NeuralGraph g = to_graph(net);
  EXPECT_THROW(add_residual_edges(g, net), GraphError);
}

TEST(ActivationEmbeddings, SharedPerActivation) {
  ad::Rng rng(12);
  Checkpoint net;
  net.spec = {zoo::linear_layer(2, 4, Activation::relu), zoo::linear_layer(4, 3, Activation::relu),
              zoo::linear_layer(3, 1, Activation::relu)};
  net = testkit::randomize(net.spec, rng);
  NeuralGraph g = build_graph(net);
  auto table = make_activation_table(8, rng);
  NeuralGraph h = attach_activation_embeddings(g, table);
  EXPECT_EQ(h.node_dim, g.node_dim + 8);
  EXPECT_EQ(h.layout.activation_channels, 8u);
  auto first_hidden = node_channels(h, 2, 1);
  for (std::size_t i = 2; i < h.num_nodes; ++i) EXPECT_EQ(node_channels(h, i, 1), first_hidden);
  std::vector<double> identity_row(table.rows.begin(), table.rows.begin() + 8);
  EXPECT_EQ(node_channels(h, 0, 1), identity_row);
}

TEST(ActivationEmbeddings, OnlyEmbeddingChannelsDifferAcrossActivations) {
  ad::Rng rng(13);
  Checkpoint a = mlp_231();
  Checkpoint b = a;
  b.spec[0].activation = Activation::tanh;
  auto table = make_activation_table(8, rng);
  NeuralGraph ga = attach_activation_embeddings(build_graph(a), table);
  NeuralGraph gb = attach_activation_embeddings(build_graph(b), table);
  EXPECT_EQ(ga.edge_features, gb.edge_features);
  for (std::size_t i = 0; i < ga.num_nodes; ++i) {
    EXPECT_EQ(ga.node_row(i)[0], gb.node_row(i)[0]);
    bool hidden = ga.node_band[i] == 1;
    EXPECT_EQ(node_channels(ga, i, 1) != node_channels(gb, i, 1), hidden) << i;
  }
}

TEST(PositionalEmbeddings, HiddenShareInputsDiffer) {
  ad::Rng rng(14);
  NeuralGraph g = build_graph(mlp_231());
  auto pe = make_positional_embeddings(g.num_position_slots(), 16, rng);
  NeuralGraph h = attach_positional_embeddings(g, pe);
  EXPECT_EQ(h.node_dim, 17u);
  EXPECT_EQ(node_channels(h, 2, 1), node_channels(h, 3, 1));
  EXPECT_EQ(node_channels(h, 3, 1), node_channels(h, 4, 1));
  EXPECT_NE(node_channels(h, 0, 1), node_channels(h, 1, 1));
  EXPECT_NE(node_channels(h, 5, 1), node_channels(h, 2, 1));
}

TEST(PositionalEmbeddings, TooFewSlotsRejected) {
  ad::Rng rng(15);
  NeuralGraph g = build_graph(mlp_231());
  auto pe = make_positional_embeddings(2, 4, rng);
  EXPECT_THROW(attach_positional_embeddings(g, pe), GraphError);
}

TEST(DirectionFeatures, DoublesEdgesAndSeparatesBlocks) {
  ad::Rng rng(16);
  Checkpoint net = testkit::random_cnn(rng).net;
  NeuralGraph g = to_graph(net, testkit::options_for(net));
  NeuralGraph d = attach_direction_features(g);
  EXPECT_EQ(d.num_edges(), 2 * g.num_edges());
  EXPECT_EQ(d.edge_dim, 2 * g.edge_dim);
  std::size_t k = g.edge_dim;
  for (std::size_t e = 0; e < d.num_edges(); ++e) {
    auto f = d.edge_row(e);
    std::size_t zero_from = d.edge_backward[e] ? 0 : k;
    for (std::size_t c = 0; c < k; ++c) EXPECT_EQ(f[zero_from + c], 0.0);
  }
}

TEST(DirectionFeatures, UndirectedBlockIsShared) {
  NeuralGraph d = attach_direction_features(build_graph(mlp_231()), true);
  EXPECT_EQ(d.edge_dim, 3u);
  for (std::size_t e = 0; e < d.num_edges(); ++e) {
    auto f = d.edge_row(e);
    EXPECT_EQ(f[2], f[0] + f[1]);
  }
}

TEST(DirectionFeatures, SecondApplicationRejected) {
  NeuralGraph d = attach_direction_features(build_graph(mlp_231()));
  EXPECT_THROW(attach_direction_features(d), GraphError);
}

TEST(Normalization, ConstantBandBecomesZero) {
  Checkpoint net = mlp_231();
  for (auto& p : net.params) std::fill(p.weight.begin(), p.weight.end(), 0.5);
  std::vector<NeuralGraph> gs{build_graph(net)};
  auto [norm, stats] = normalize_layerwise(gs);
  for (double v : norm[0].edge_features) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(stats[1].weight_std[0], 1e-6);
}

TEST(Normalization, EmptyBatchRejected) {
  std::vector<NeuralGraph> none;
  EXPECT_THROW(normalize_layerwise(none), GraphError);
}

TEST(Normalization, BandsAreStandardized) {
  ad::Rng rng(17);
  std::vector<zoo::LayerSpec> spec{zoo::linear_layer(3, 5, Activation::relu), zoo::linear_layer(5, 2, Activation::identity)};
  std::vector<NeuralGraph> gs;
  for (int i = 0; i < 6; ++i) gs.push_back(build_graph(testkit::randomize(spec, rng)));
  auto [norm, stats] = normalize_layerwise(gs);
  for (std::size_t band = 1; band < 3; ++band) {
    double s = 0, s2 = 0, n = 0, b = 0, b2 = 0, bn = 0;
    for (const auto& g : norm) {
      for (std::size_t e = 0; e < g.num_edges(); ++e)
        if (g.node_band[g.edge_dst[e]] == band) {
          double v = g.edge_row(e)[0];
          s += v, s2 += v * v, n += 1;
        }
      for (std::size_t i = 0; i < g.num_nodes; ++i)
        if (g.node_band[i] == band) {
          double v = g.node_row(i)[0];
          b += v, b2 += v * v, bn += 1;
        }
    }
    EXPECT_LT(std::abs(s / n), 1e-12);
    EXPECT_LT(std::abs(std::sqrt(s2 / n - (s / n) * (s / n)) - 1.0), 1e-9);
    EXPECT_LT(std::abs(b / bn), 1e-12);
    EXPECT_LT(std::abs(std::sqrt(b2 / bn - (b / bn) * (b / bn)) - 1.0), 1e-9);
  }
}

TEST(Normalization, PaddingSlotsStayOutOfStatistics) {
  ad::Rng rng(18);
  std::vector<NeuralGraph> gs;
  for (int i = 0; i < 3; ++i) {
    Checkpoint net = testkit::randomize({zoo::conv_layer(2, 3, {1, 1}, Activation::relu),
                                         zoo::conv_layer(3, 2, {3, 3}, Activation::identity)},
                                        rng);
    gs.push_back(build_graph(net));
  }
  auto [norm, stats] = normalize_layerwise(gs);
  // 1x1 kernels live in the center slot only; every other slot stays zero
  for (std::size_t e = 0; e < norm[0].num_edges(); ++e)
    if (norm[0].node_band[norm[0].edge_dst[e]] == 1)
      for (std::size_t k = 0; k < 9; ++k)
        if (k != 4) EXPECT_EQ(norm[0].edge_row(e)[k], 0.0);
}

TEST(Normalization, StatsInvariantUnderPermutation) {
  ad::Rng rng(19);
  for (Family f : {Family::mlp, Family::cnn, Family::norm, Family::transformer}) {
    std::vector<NeuralGraph> gs, ps;
    std::vector<zoo::LayerSpec> spec = testkit::random_family_net(f, rng).net.spec;
    for (int i = 0; i < 4; ++i) {
      Checkpoint net = testkit::randomize(spec, rng);
      auto opts = testkit::options_for(net);
      gs.push_back(build_graph(net, opts));
      ps.push_back(build_graph(zoo::permute(net, zoo::random_hidden_permutation(net, rng)), opts));
    }
    auto a = layerwise_stats(gs), b = layerwise_stats(ps);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      for (std::size_t c = 0; c < a[k].weight_mean.size(); ++c) {
        EXPECT_NEAR(a[k].weight_mean[c], b[k].weight_mean[c], 1e-12) << testkit::family_name(f);
        EXPECT_NEAR(a[k].weight_std[c], b[k].weight_std[c], 1e-12) << testkit::family_name(f);
      }
      EXPECT_NEAR(a[k].bias_mean, b[k].bias_mean, 1e-12);
      EXPECT_NEAR(a[k].bias_std, b[k].bias_std, 1e-12);
    }
  }
}

TEST(Normalization, DenormalizeInverts) {
  ad::Rng rng(20);
  std::vector<zoo::LayerSpec> spec = testkit::random_cnn(rng).net.spec;
  std::vector<NeuralGraph> gs;
  for (int i = 0; i < 3; ++i) {
    Checkpoint net = testkit::randomize(spec, rng);
    gs.push_back(to_graph(net, testkit::options_for(net)));
  }
  auto [norm, stats] = normalize_layerwise(gs);
  NeuralGraph back = denormalize(norm[1]);
  ASSERT_EQ(back.edge_features.size(), gs[1].edge_features.size());
  for (std::size_t i = 0; i < back.edge_features.size(); ++i) EXPECT_NEAR(back.edge_features[i], gs[1].edge_features[i], 1e-12);
  for (std::size_t i = 0; i < back.node_features.size(); ++i) EXPECT_NEAR(back.node_features[i], gs[1].node_features[i], 1e-12);
  EXPECT_FALSE(back.layout.normalized);
}

TEST(Normalization, MustPrecedeDirectionFeatures) {
  std::vector<NeuralGraph> gs{attach_direction_features(build_graph(mlp_231()))};
  EXPECT_THROW(normalize_layerwise(gs), GraphError);
}

TEST(Normalization, NormalizedGraphsCannotBeConvertedBack) {
  std::vector<NeuralGraph> gs{build_graph(mlp_231())};
  auto [norm, stats] = normalize_layerwise(gs);
  EXPECT_THROW(graph_to_network(norm[0]), GraphError);
}

TEST(Probes, IdentityNetCarriesTheProbe) {
  Checkpoint net;
  net.spec = {zoo::linear_layer(1, 1, Activation::identity)};
  net.params = {params({1}, {0})};
  NeuralGraph g = attach_probe_features(build_graph(net), Tensor::from({1, 1}, {0.7}));
  EXPECT_EQ(g.node_dim, 2u);
  EXPECT_EQ(g.node_row(0)[1], 0.7);
  EXPECT_EQ(g.node_row(1)[1], 0.7);
}

TEST(Probes, HiddenChannelsArePostActivation) {
  Checkpoint net = mlp_231();
  NeuralGraph g = attach_probe_features(build_graph(net), Tensor::from({1, 2}, {1.0, 1.0}));
  // layer 1 pre-activations: -1+0.1, 3.5+0.2, 1+0.3
  EXPECT_EQ(g.node_row(2)[1], 0.0);
  EXPECT_NEAR(g.node_row(3)[1], 3.7, 1e-12);
  EXPECT_NEAR(g.node_row(4)[1], 1.3, 1e-12);
  EXPECT_NEAR(g.node_row(5)[1], -3.7 + 2.6 + 0.4, 1e-12);
}

TEST(Probes, ZeroProbesLeaveGraphUnchanged) {
  NeuralGraph g = build_graph(mlp_231());
  EXPECT_EQ(attach_probe_features(g, Tensor::zeros({0, 2})), g);
}

TEST(Probes, DimensionMismatchRejected) {
  NeuralGraph g = build_graph(mlp_231());
  EXPECT_THROW(attach_probe_features(g, Tensor::zeros({3, 5})), GraphError);
}

TEST(Probes, EquivariantUnderHiddenPermutations) {
  ad::Rng rng(21);
  for (Family f : {Family::mlp, Family::norm}) {
    for (int t = 0; t < 5; ++t) {
      Checkpoint net = testkit::random_family_net(f, rng).net;
      if (t == 4) net = testkit::random_mlp(rng, true).net;
      Tensor probes = make_probes(6, net.input_dim(), rng, false);
      auto p = zoo::random_hidden_permutation(net, rng);
      NeuralGraph a = attach_probe_features(to_graph(net), probes);
      NeuralGraph b = attach_probe_features(to_graph(zoo::permute(net, p)), probes);
      NeuralGraph pa = permute_graph(a, node_permutation(a, p));
      ASSERT_EQ(pa.node_features.size(), b.node_features.size());
      for (std::size_t i = 0; i < b.node_features.size(); ++i) EXPECT_NEAR(pa.node_features[i], b.node_features[i], 1e-12);
    }
  }
}

TEST(Probes, GradientReachesProbes) {
  ad::Rng rng(22);
  Checkpoint net = testkit::random_norm_net(rng).net;
  NeuralGraph g = build_graph(net);
  Tensor probes = make_probes(3, net.input_dim(), rng, true);
  ad::sum_all(probe_values(g, probes)).backward();
  ASSERT_TRUE(probes.has_grad());
  double norm = 0;
  for (double v : probes.grad()) norm += std::abs(v);
  EXPECT_GT(norm, 0.0);
}

TEST(ForwardOnGraph, SmallMlpMatchesEvaluate) {
  Checkpoint net = mlp_231();
  ad::Rng rng(23);
  Tensor x = testkit::random_input({10, 2}, rng);
  EXPECT_LT(max_abs_diff(forward_on_graph(build_graph(net), x), zoo::evaluate(net, x)), 1e-12);
}

TEST(ForwardOnGraph, ZeroWeightsGiveLastBiases) {
  Checkpoint net = mlp_231();
  for (auto& p : net.params) std::fill(p.weight.begin(), p.weight.end(), 0.0);
  Tensor y = forward_on_graph(build_graph(net), Tensor::vector({0.3, -2.0}));
  EXPECT_EQ(y.to_vector(), (std::vector<double>{0.4}));
}

TEST(ForwardOnGraph, MatchesEvaluateForEveryExecutableFamily) {
  ad::Rng rng(24);
  for (Family f : executable_families())
    for (int t = 0; t < 6; ++t) {
      auto fn = testkit::random_family_net(f, rng);
      ad::Shape shape = fn.input_shape;
      shape[0] = 100;
      Tensor x = testkit::random_input(shape, rng);
      NeuralGraph g = to_graph(fn.net, testkit::options_for(fn.net));
      EXPECT_LT(max_abs_diff(forward_on_graph(g, x), zoo::evaluate(fn.net, x)), 1e-9) << testkit::family_name(f);
    }
}

TEST(ForwardOnGraph, FlattenModesMatchEvaluate) {
  ad::Rng rng(25);
  for (int t = 0; t < 4; ++t) {
    Checkpoint net = flatten_net(rng);
    Tensor x = testkit::random_input({7, 1, 4, 4}, rng);
    for (FlattenMode m : {FlattenMode::repeat_nodes, FlattenMode::virtual_layer}) {
      NeuralGraph g = to_graph(net, testkit::options_for(net, m));
      EXPECT_LT(max_abs_diff(forward_on_graph(g, x), zoo::evaluate(net, x)), 1e-12);
    }
  }
}

TEST(ForwardOnGraph, WildParkArchitectureMatchesEvaluate) {
  ad::Rng rng(26);
  zoo::WildParkConfig cfg;
  for (int t = 0; t < 3; ++t) {
    Checkpoint net = zoo::init_checkpoint(zoo::sample_cnn_spec(rng, cfg), rng);
    Tensor x = testkit::random_input({4, 1, cfg.image_size, cfg.image_size}, rng);
    EXPECT_LT(max_abs_diff(forward_on_graph(to_graph(net), x), zoo::evaluate(net, x)), 1e-9);
  }
}

TEST(ForwardOnGraph, UnbatchedInput) {
  ad::Rng rng(27);
  Checkpoint net = testkit::random_cnn(rng).net;
  Tensor x = testkit::random_input({net.input_dim(), 8, 8}, rng);
  NeuralGraph g = to_graph(net, testkit::options_for(net));
  EXPECT_LT(max_abs_diff(forward_on_graph(g, x), zoo::evaluate(net, x)), 1e-12);
}

TEST(ForwardOnGraph, RejectsAttentionGraphs) {
  ad::Rng rng(28);
  NeuralGraph g = to_graph(testkit::random_transformer(rng).net);
  EXPECT_THROW(forward_on_graph(g, Tensor::zeros({3, g.input_dim()})), GraphError);
}

TEST(ForwardOnGraph, RejectsCycles) {
  NeuralGraph g = build_graph(mlp_231());
  std::vector<double> f{1.0};
  push_edge(g, 5, 0, EdgeKind::weight, false, f);
  EXPECT_THROW(forward_on_graph(g, Tensor::vector({1, 1})), GraphError);
}

TEST(ForwardOnGraph, RejectsUnboundActivation) {
  NeuralGraph g = build_graph(mlp_231());
  g.node_activation[3] = static_cast<Activation>(42);
  EXPECT_THROW(forward_on_graph(g, Tensor::vector({1, 1})), GraphError);
}

TEST(Commutation, PermutedNetworkGivesPermutedGraph) {
  ad::Rng rng(29);
  for (Family f : testkit::kAllFamilies)
    for (int t = 0; t < 8; ++t) {
      Checkpoint net = testkit::random_family_net(f, rng).net;
      for (FlattenMode m : {FlattenMode::repeat_nodes, FlattenMode::virtual_layer}) {
        auto opts = testkit::options_for(net, m);
        auto p = zoo::random_hidden_permutation(net, rng);
        NeuralGraph g = to_graph(net, opts);
        NeuralGraph moved = permute_graph(g, node_permutation(g, p));
        EXPECT_EQ(testkit::graph_diff(to_graph(zoo::permute(net, p), opts), moved), "") << testkit::family_name(f);
        if (!testkit::has_flatten(net)) break;
      }
    }
}

TEST(Commutation, WholeGraphPermutationIsAGroupAction) {
  ad::Rng rng(30);
  Checkpoint net = testkit::random_cnn(rng, true).net;
  NeuralGraph g = to_graph(net, testkit::options_for(net));
  auto p = zoo::random_hidden_permutation(net, rng);
  auto q = zoo::random_hidden_permutation(net, rng);
  NeuralGraph two_steps = permute_graph(permute_graph(g, node_permutation(g, p)), node_permutation(g, q));
  EXPECT_EQ(testkit::graph_diff(two_steps, permute_graph(g, node_permutation(g, zoo::compose(q, p)))), "");
}

TEST(RoundTrip, GraphToNetworkIsExact) {
  ad::Rng rng(31);
  for (Family f : testkit::kAllFamilies)
    for (int t = 0; t < 8; ++t) {
      Checkpoint net = testkit::random_family_net(f, rng).net;
      for (FlattenMode m : {FlattenMode::repeat_nodes, FlattenMode::virtual_layer})
        for (LinearMode lm : {LinearMode::as_1x1_conv, LinearMode::as_mlp}) {
          auto opts = testkit::options_for(net, m);
          opts.linear_mode = lm;
          EXPECT_EQ(graph_to_network(build_graph(net, opts)), net) << testkit::family_name(f);
          EXPECT_EQ(graph_to_network(to_graph(net, opts)), net) << testkit::family_name(f);
        }
    }
}

TEST(RoundTrip, LargerWindowStillExact) {
  ad::Rng rng(32);
  Checkpoint net = testkit::random_cnn(rng).net;
  auto opts = testkit::options_for(net);
  opts.max_kernel = zoo::KernelSize{7, 7};
  EXPECT_EQ(graph_to_network(build_graph(net, opts)), net);
}

TEST(RoundTrip, TamperedPaddingRejected) {
  Checkpoint net;
  net.spec = {zoo::conv_layer(1, 1, {1, 1}, Activation::identity)};
  net.params = {params({2}, {0})};
  auto opts = GraphOptions{};
  opts.max_kernel = zoo::KernelSize{3, 3};
  NeuralGraph g = build_graph(net, opts);
  g.edge_row(0)[0] = 1.0;
  EXPECT_THROW(graph_to_network(g), GraphError);
}

TEST(GraphFile, RoundTripIsExact) {
  ad::Rng rng(33);
  Checkpoint net = testkit::random_cnn(rng, true).net;
  net.metadata["test_accuracy"] = "0.5";
  std::vector<NeuralGraph> gs{to_graph(net, testkit::options_for(net))};
  NeuralGraph g = normalize_layerwise(gs).first[0];
  g = attach_positional_embeddings(g, make_positional_embeddings(g.num_position_slots(), 4, rng));
  g = attach_direction_features(g);
  auto path = temp_file("g.ng").string();
  save_graph(g, path);
  EXPECT_EQ(testkit::graph_diff(load_graph(path), g), "");
}

TEST(GraphFile, TruncationAndMagicErrors) {
  auto bytes = graph_to_bytes(build_graph(mlp_231()));
  auto cut = bytes;
  cut.resize(bytes.size() - 5);
  EXPECT_THROW(graph_from_bytes(cut), ngraph::util::FormatError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(graph_from_bytes(bad), ngraph::util::FormatError);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(graph_from_bytes(extra), ngraph::util::FormatError);
}
