#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "ngraph/netzoo/network.hpp"
#include "ngraph/netzoo/permutation.hpp"
#include "ngraph/netzoo/serialize.hpp"
#include "ngraph/netzoo/toy_images.hpp"
#include "ngraph/netzoo/zoo.hpp"
#include "../support/families.hpp"

using namespace ngraph;
using namespace ngraph::zoo;
using ad::Tensor;
namespace testkit = ngraph::testkit;
using testkit::Family;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Checkpoint hand_mlp() {
  Checkpoint net;
  net.spec = {linear_layer(2, 2, Activation::relu), linear_layer(2, 1, Activation::identity)};
  net.params = {{.weight = {1, 2, -1, 0.5}, .bias = {0.1, -0.2}}, {.weight = {2, -1}, .bias = {0.5}}};
  return net;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "ngraph_netzoo_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Evaluate, IdentityLinearLayer) {
  Checkpoint net;
  net.spec = {linear_layer(2, 2, Activation::identity)};
  net.params = {{.weight = {1, 0, 0, 1}, .bias = {0, 0}}};
  Tensor y = evaluate(net, Tensor::vector({0.3, -0.7}));
  EXPECT_EQ(y.to_vector(), (std::vector<double>{0.3, -0.7}));
}

TEST(Evaluate, HandComputedTwoLayerMlp) {
  // hidden = relu([1+4+0.1, -1+1-0.2]) = [5.1, 0]; out = 2*5.1 - 0 + 0.5
  Tensor y = evaluate(hand_mlp(), Tensor::vector({1, 2}));
  ASSERT_EQ(y.size(), 1u);
  EXPECT_NEAR(y[0], 10.7, 1e-12);
}

TEST(Evaluate, ConvKernelOnConstantPatch) {
  Checkpoint net;
  net.spec = {conv_layer(1, 1, {3, 3}, Activation::identity)};
  net.params = {{.weight = {0.1, -0.2, 0.1, 0.1, -0.3, 0.2, 0.2, -0.2, 0.3}, .bias = {0}}};
  Tensor y = evaluate(net, Tensor::full({1, 3, 3}, 1.0));
  EXPECT_EQ(y.shape(), (ad::Shape{1, 3, 3}));
  EXPECT_NEAR(y.data()[4], 0.3, 1e-12);
}

TEST(Evaluate, ConvMatchesDirectCrossCorrelation) {
  ad::Rng rng(3);
  Checkpoint net = testkit::randomize({conv_layer(2, 3, {5, 3}, Activation::tanh)}, rng);
  Tensor x = testkit::random_input({1, 2, 6, 7}, rng);
  Tensor y = evaluate(net, x);
  const auto& w = net.params[0].weight;
  std::size_t kh = 3, kw = 5;
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t c = 0; c < 7; ++c) {
        double acc = net.params[0].bias[o];
        for (std::size_t i = 0; i < 2; ++i)
          for (std::size_t a = 0; a < kh; ++a)
            for (std::size_t b = 0; b < kw; ++b) {
              long rr = static_cast<long>(r + a) - static_cast<long>(kh / 2);
              long cc = static_cast<long>(c + b) - static_cast<long>(kw / 2);
              if (rr < 0 || cc < 0 || rr >= 6 || cc >= 7) continue;
              acc += w[((o * 2 + i) * kh + a) * kw + b] * x.data()[(i * 6 + rr) * 7 + cc];
            }
        EXPECT_NEAR(y.data()[(o * 6 + r) * 7 + c], std::tanh(acc), 1e-12);
      }
}

TEST(Evaluate, NormLayerIsAffine) {
  Checkpoint net;
  net.spec = {norm_layer(2)};
  net.params = {{.weight = {2, 3}, .bias = {1, -1}}};
  EXPECT_EQ(evaluate(net, Tensor::vector({1, 1})).to_vector(), (std::vector<double>{3, 2}));
}

TEST(Evaluate, AttentionMatchesDirectFormula) {
  ad::Rng rng(5);
  Checkpoint net = testkit::randomize({attention_layer(3, 2, 2)}, rng);
  Tensor x = testkit::random_input({4, 3}, rng);
  Tensor y = evaluate(net, x);
  const auto& p = net.params[0];
  auto proj = [&](const std::vector<double>& m, std::size_t t, std::size_t r) {
    double s = 0;
    for (std::size_t c = 0; c < 3; ++c) s += m[r * 3 + c] * x.data()[t * 3 + c];
    return s;
  };
  for (std::size_t t = 0; t < 4; ++t) {
    std::vector<double> concat(4, 0.0);
    for (std::size_t h = 0; h < 2; ++h) {
      std::vector<double> logits(4);
      for (std::size_t u = 0; u < 4; ++u) {
        double dot = 0;
        for (std::size_t k = 0; k < 2; ++k) dot += proj(p.query, t, h * 2 + k) * proj(p.key, u, h * 2 + k);
        logits[u] = dot / std::sqrt(2.0);
      }
      double mx = *std::max_element(logits.begin(), logits.end()), z = 0;
      for (auto& l : logits) z += (l = std::exp(l - mx));
      for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t k = 0; k < 2; ++k) concat[h * 2 + k] += logits[u] / z * proj(p.value, u, h * 2 + k);
    }
    for (std::size_t o = 0; o < 3; ++o) {
      double v = p.bias[o];
      for (std::size_t r = 0; r < 4; ++r) v += p.weight[o * 4 + r] * concat[r];
      EXPECT_NEAR(y.data()[t * 3 + o], v, 1e-12);
    }
  }
}

TEST(Evaluate, ResidualUsesMinChannelRule) {
  Checkpoint net;
  net.spec = {linear_layer(2, 3, Activation::identity), linear_layer(3, 1, Activation::identity),
              linear_layer(1, 2, Activation::identity)};
  net.spec[2].residual_source = 0;
  net.params = {{.weight = std::vector<double>(6, 0.0), .bias = {0, 0, 0}},
                {.weight = {0, 0, 0}, .bias = {1}},
                {.weight = {1, 1}, .bias = {0, 0}}};
  // layer 3 pre-activation = [1, 1] + first min(2, 2) input entries
  EXPECT_EQ(evaluate(net, Tensor::vector({0.25, -0.5})).to_vector(), (std::vector<double>{1.25, 0.5}));
}

TEST(Evaluate, RejectsWrongInputWidth) {
  EXPECT_THROW(evaluate(hand_mlp(), Tensor::vector({1, 2, 3})), ad::ShapeError);
}

TEST(Validate, ConvRequiresKernelAndLinearForbidsIt) {
  Checkpoint net = hand_mlp();
  net.spec[0].kernel = KernelSize{3, 3};
  EXPECT_THROW(validate(net), CheckpointError);
  std::vector<LayerSpec> spec{conv_layer(1, 2, {3, 3}, Activation::relu)};
  spec[0].kernel.reset();
  EXPECT_THROW(validate_spec(spec), CheckpointError);
}

TEST(Validate, ResidualMustSkipAtLeastOneLayer) {
  std::vector<LayerSpec> spec{linear_layer(2, 2, Activation::relu), linear_layer(2, 2, Activation::relu)};
  spec[1].residual_source = 1;
  EXPECT_THROW(validate_spec(spec), CheckpointError);
  spec[1].residual_source = 0;  // the input is two positions before layer 2
  EXPECT_NO_THROW(validate_spec(spec));
}

TEST(Permute, IdentityIsBitIdentical) {
  ad::Rng rng(1);
  for (Family f : testkit::kAllFamilies) {
    Checkpoint net = testkit::random_family_net(f, rng).net;
    EXPECT_EQ(permute(net, identity_permutation(net)), net) << testkit::family_name(f);
  }
}

TEST(Permute, HiddenPermutationPreservesFunction) {
  ad::Rng rng(2);
  for (Family f : testkit::kAllFamilies)
    for (int trial = 0; trial < 8; ++trial) {
      auto fn = testkit::random_family_net(f, rng);
      auto p = random_hidden_permutation(fn.net, rng);
      Checkpoint q = permute(fn.net, p);
      Tensor x = testkit::random_input(fn.input_shape, rng);
      EXPECT_LT(max_abs_diff(evaluate(fn.net, x), evaluate(q, x)), 1e-9) << testkit::family_name(f);
    }
}

TEST(Permute, RandomHiddenPermutationMovesSomething) {
  ad::Rng rng(7);
  Checkpoint net = testkit::randomize({linear_layer(3, 8, Activation::relu), linear_layer(8, 2, Activation::identity)}, rng);
  auto p = random_hidden_permutation(net, rng);
  EXPECT_NE(p, identity_permutation(net));
  EXPECT_EQ(p.groups.front(), identity_permutation(net).groups.front());
  EXPECT_EQ(p.groups.back(), identity_permutation(net).groups.back());
}

TEST(Permute, SwappingTwiceRestoresCheckpoint) {
  Checkpoint net = hand_mlp();
  auto p = identity_permutation(net);
  std::swap(p.groups[1][0], p.groups[1][1]);
  Checkpoint once = permute(net, p);
  EXPECT_NE(once, net);
  EXPECT_EQ(permute(once, p), net);
}

TEST(Permute, IsAGroupAction) {
  ad::Rng rng(4);
  for (Family f : testkit::kAllFamilies)
    for (int trial = 0; trial < 5; ++trial) {
      Checkpoint net = testkit::random_family_net(f, rng).net;
      auto p = random_hidden_permutation(net, rng);
      auto q = random_hidden_permutation(net, rng);
      EXPECT_EQ(permute(permute(net, p), q), permute(net, compose(q, p))) << testkit::family_name(f);
      EXPECT_EQ(permute(permute(net, p), inverse(p)), net);
    }
}

TEST(Permute, RejectsSizeMismatch) {
  Checkpoint net = hand_mlp();
  auto p = identity_permutation(net);
  p.groups[1].push_back(2);
  EXPECT_THROW(permute(net, p), CheckpointError);
}

TEST(Permute, RejectsPermutationThatBreaksNormTie) {
  Checkpoint net;
  net.spec = {linear_layer(2, 2, Activation::identity), norm_layer(2), linear_layer(2, 1, Activation::identity)};
  net.params = {{.weight = {1, 0, 0, 1}, .bias = {0, 0}}, {.weight = {1, 1}, .bias = {0, 0}},
                {.weight = {1, 1}, .bias = {0}}};
  auto p = identity_permutation(net);
  p.groups[1] = {1, 0};
  EXPECT_THROW(permute(net, p), CheckpointError);
  p.groups[2] = {1, 0};
  EXPECT_NO_THROW(permute(net, p));
}

TEST(Serialize, RoundTripIsBitwise) {
  ad::Rng rng(9);
  for (Family f : testkit::kAllFamilies) {
    Checkpoint net = testkit::random_family_net(f, rng).net;
    net.metadata["note"] = "x";
    auto path = temp_file("roundtrip.json");
    save_checkpoint(net, path.string());
    EXPECT_EQ(load_checkpoint(path.string()), net) << testkit::family_name(f);
  }
}

TEST(Serialize, TruncatedFileIsAnError) {
  std::string text = checkpoint_to_json(hand_mlp());
  for (std::size_t cut : {std::size_t{0}, text.size() / 3, text.size() - 2})
    EXPECT_THROW(checkpoint_from_json(text.substr(0, cut)), util::FormatError);
}

TEST(Serialize, UnknownActivationIsNamed) {
  std::string text = checkpoint_to_json(hand_mlp());
  auto pos = text.find("\"relu\"");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 6, "\"swishy\"");
  try {
    checkpoint_from_json(text);
    FAIL() << "expected an error";
  } catch (const util::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("swishy"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("spec[0]"), std::string::npos);
  }
}

TEST(Serialize, CorruptBlobNamesField) {
  std::string text = checkpoint_to_json(hand_mlp());
  auto pos = text.find("\"bias\": \"");
  ASSERT_NE(pos, std::string::npos);
  text.insert(pos + 9, "!!!!");
  try {
    checkpoint_from_json(text);
    FAIL() << "expected an error";
  } catch (const util::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("params[0].bias"), std::string::npos) << e.what();
  }
}

TEST(FitInr, ConstantImageIsFitQuickly) {
  ad::Rng rng(11);
  Tensor image = Tensor::full({16, 16}, 0.5);
  Checkpoint inr = fit_inr(image, rng);
  EXPECT_LT(inr_mse(inr, image), 1e-4);
  EXPECT_LT(std::stod(inr.metadata.at("mse")), 1e-4);
}

TEST(FitInr, SpecIsSineMlp) {
  ad::Rng rng(12);
  Checkpoint inr = fit_inr(Tensor::full({4, 4}, 0.2), rng, {.steps = 2});
  ASSERT_EQ(inr.num_layers(), 3u);
  for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(inr.spec[l].kind, LayerKind::linear);
  EXPECT_EQ(inr.spec[0].activation, Activation::sine);
  EXPECT_EQ(inr.spec[1].activation, Activation::sine);
  EXPECT_EQ(inr.input_dim(), 2u);
  EXPECT_EQ(inr.output_dim(), 1u);
}

TEST(FitInr, DeterministicUnderSeed) {
  ad::Rng a(13), b(13);
  auto shape_rng = ad::Rng(1);
  Tensor image = Tensor::from({16, 16}, render_shape(ShapeFamily::disk, 16, shape_rng));
  EXPECT_EQ(fit_inr(image, a, {.steps = 50}), fit_inr(image, b, {.steps = 50}));
}

TEST(FitInr, RejectsNonFinitePixels) {
  ad::Rng rng(1);
  EXPECT_THROW(fit_inr(Tensor::from({1, 2}, {0.0, std::nan("")}), rng), std::invalid_argument);
}

TEST(ToyImages, FamiliesAreBinaryAndDistinct) {
  ad::Rng rng(2);
  for (std::size_t f = 0; f < kNumShapeFamilies; ++f) {
    auto img = render_shape(static_cast<ShapeFamily>(f), 16, rng);
    double on = 0;
    for (double v : img) {
      EXPECT_TRUE(v == 0.0 || v == 1.0);
      on += v;
    }
    EXPECT_GT(on, 0.0);
    EXPECT_LT(on, 256.0);
  }
  auto set = make_toy_image_set(4, 16, 0.1, rng);
  EXPECT_EQ(set.images.shape(), (ad::Shape{12, 1, 16, 16}));
  EXPECT_EQ(std::count(set.labels.begin(), set.labels.end(), 2u), 4);
}

TEST(WildPark, ZeroCountIsEmpty) {
  ad::Rng rng(1);
  EXPECT_TRUE(generate_wild_park_mini(rng, 0).empty());
}

TEST(WildPark, SampledArchitecturesFollowVariationAxes) {
  ad::Rng rng(21);
  WildParkConfig cfg;
  for (int i = 0; i < 200; ++i) {
    auto spec = sample_cnn_spec(rng, cfg);
    std::size_t convs = spec.size() - 1;
    EXPECT_GE(convs, 2u);
    EXPECT_LE(convs, 5u);
    for (std::size_t l = 0; l < convs; ++l) {
      ASSERT_EQ(spec[l].kind, LayerKind::conv2d);
      EXPECT_TRUE(std::set<std::size_t>({3, 5, 7}).count(spec[l].kernel->width));
      EXPECT_EQ(spec[l].kernel->width, spec[l].kernel->height);
      EXPECT_TRUE(std::set<std::size_t>({4, 8, 16, 32}).count(spec[l].out_dim));
      EXPECT_NE(spec[l].activation, Activation::sine);
    }
    EXPECT_NO_THROW(validate_spec(spec));
  }
}

TEST(WildPark, SmallZooIsUsable) {
  ad::Rng rng(5);
  WildParkConfig cfg;
  cfg.train_per_class = 8;
  cfg.test_per_class = 4;
  cfg.max_steps = 12;
  cfg.batch = 6;
  auto zoo = generate_wild_park_mini(rng, 6, cfg);
  ASSERT_EQ(zoo.size(), 6u);
  for (const auto& m : zoo) {
    EXPECT_GE(m.accuracy, 0.0);
    EXPECT_LE(m.accuracy, 1.0);
    EXPECT_EQ(m.net.metadata.at("test_accuracy"), util::format_double(m.accuracy));
    Tensor y = evaluate(m.net, testkit::random_input({2, 1, 16, 16}, rng));
    EXPECT_EQ(y.shape(), (ad::Shape{2, 3}));
  }
  EXPECT_EQ(zoo[0].lineage, zoo[1].lineage);
  ad::Rng again(5);
  auto zoo2 = generate_wild_park_mini(again, 6, cfg);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(zoo[i].net, zoo2[i].net);
}
