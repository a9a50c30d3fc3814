#pragma once

#include <cstddef>
#include <vector>

#include "ngraph/autodiff/rng.hpp"
#include "ngraph/netzoo/checkpoint.hpp"
#include "ngraph/netzoo/toy_images.hpp"

namespace ngraph::zoo {

struct InrConfig {
  std::size_t hidden = 16;
  std::size_t hidden_layers = 2;
  std::size_t steps = 500;
  double lr = 2e-2;
  double omega = 10.0;  // first-layer frequency, folded into the weights
};

/// Fits a sine-activated coordinate MLP to a grayscale image [h, w] with
/// values in [0, 1]. Coordinates (row, col) are mapped to [-1, 1]. The final
/// reconstruction MSE is stored under metadata "mse".
Checkpoint fit_inr(const ad::Tensor& image, ad::Rng& rng, const InrConfig& cfg = {});

/// Grid coordinates (row, col) spanning [-1, 1], [h * w, 2] row-major.
ad::Tensor inr_coordinates(std::size_t h, std::size_t w);
/// Full-batch reconstruction error of an INR against an image.
double inr_mse(const Checkpoint& inr, const ad::Tensor& image);

struct WildParkConfig {
  std::size_t image_size = 16;
  std::size_t train_per_class = 64;
  std::size_t test_per_class = 40;
  double noise = 0.6;
  std::size_t checkpoints_per_run = 4;
  std::size_t min_steps = 8;
  std::size_t max_steps = 80;
  std::size_t batch = 24;
  double skip_probability = 0.3;
};

struct ZooMember {
  Checkpoint net;
  double accuracy = 0.0;
  std::size_t lineage = 0;  // index of the training run
};

/// Samples heterogeneous CNNs (2-5 conv layers followed by a linear head),
/// trains each run on the toy shape task and records several checkpoints per
/// run with their held-out accuracy. Returns exactly `count` members.
std::vector<ZooMember> generate_wild_park_mini(ad::Rng& rng, std::size_t count, const WildParkConfig& cfg = {});

/// Largest kernel the sampler draws (kernels are 3, 5 or 7, square).
inline constexpr std::size_t kWildParkMaxKernel = 7;

/// Architecture sampler used by the generator.
std::vector<LayerSpec> sample_cnn_spec(ad::Rng& rng, const WildParkConfig& cfg);

/// Fraction of correctly classified images.
double accuracy(const Checkpoint& net, const ImageSet& set);

}  // namespace ngraph::zoo
