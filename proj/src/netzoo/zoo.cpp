#include "ngraph/netzoo/zoo.hpp"

#include <cmath>
#include <stdexcept>

#include "ngraph/netzoo/network.hpp"
#include "ngraph/trainer/adam.hpp"
#include "ngraph/util/codec.hpp"

namespace ngraph::zoo {

using ad::Tensor;

Tensor inr_coordinates(std::size_t h, std::size_t w) {
  auto norm = [](std::size_t i, std::size_t n) {
    return n > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0 : 0.0;
  };
  std::vector<double> c;
  c.reserve(h * w * 2);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t col = 0; col < w; ++col) {
      c.push_back(norm(r, h));
      c.push_back(norm(col, w));
    }
  return Tensor::from({h * w, 2}, std::move(c));
}

namespace {

void check_image(const Tensor& image) {
  if (image.rank() != 2) throw ad::ShapeError("INR image must be [h, w], got " + ad::shape_str(image.shape()));
  for (double v : image.data())
    if (!std::isfinite(v)) throw std::invalid_argument("INR image contains a non-finite pixel value");
}

}  // namespace

Checkpoint fit_inr(const Tensor& image, ad::Rng& rng, const InrConfig& cfg) {
  check_image(image);
  std::size_t h = image.dim(0), w = image.dim(1);
  std::vector<LayerSpec> spec;
  std::size_t in = 2;
  for (std::size_t l = 0; l < cfg.hidden_layers; ++l) {
    spec.push_back(linear_layer(in, cfg.hidden, Activation::sine));
    in = cfg.hidden;
  }
  spec.push_back(linear_layer(in, 1, Activation::identity));

  Checkpoint net;
  for (std::size_t l = 0; l < spec.size(); ++l) {
    const LayerSpec& s = spec[l];
    double n = static_cast<double>(s.in_dim);
    double wb = l == 0 ? cfg.omega / n : std::sqrt(6.0 / n);
    double bb = (l == 0 ? cfg.omega : 1.0) / std::sqrt(n);
    LayerParams p;
    for (std::size_t i = 0; i < s.in_dim * s.out_dim; ++i) p.weight.push_back(rng.uniform(-wb, wb));
    for (std::size_t i = 0; i < s.out_dim; ++i) p.bias.push_back(rng.uniform(-bb, bb));
    net.params.push_back(std::move(p));
  }
  net.spec = spec;
  validate(net);

  Tensor coords = inr_coordinates(h, w);
  Tensor target = ad::reshape(image, {h * w, 1});
  NetworkTensors tensors = make_tensors(net, true);
  auto params = tensors.trainable();
  train::AdamState state;
  train::AdamConfig adam{.lr = cfg.lr};
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Tensor loss = ad::mse_loss(forward(net.spec, tensors, coords), target);
    loss.backward();
    train::adam_step(params, state, adam);
  }
  write_back(net, tensors);
  net.metadata["mse"] = util::format_double(inr_mse(net, image));
  net.metadata["steps"] = std::to_string(cfg.steps);
  return net;
}

double inr_mse(const Checkpoint& inr, const Tensor& image) {
  check_image(image);
  std::size_t h = image.dim(0), w = image.dim(1);
  Tensor pred = evaluate(inr, inr_coordinates(h, w));
  return ad::mse_loss(pred, ad::reshape(image, {h * w, 1})).item();
}

std::vector<LayerSpec> sample_cnn_spec(ad::Rng& rng, const WildParkConfig& cfg) {
  static const std::vector<std::size_t> kChannels{4, 8, 16, 32};
  static const std::vector<std::size_t> kKernels{3, 5, kWildParkMaxKernel};
  static const std::vector<Activation> kActs{Activation::relu,    Activation::gelu,       Activation::tanh,
                                             Activation::sigmoid, Activation::leaky_relu, Activation::identity};
  std::size_t layers = 2 + rng.index(4);
  std::vector<LayerSpec> spec;
  std::size_t in = 1, spatial = cfg.image_size;
  for (std::size_t l = 1; l <= layers; ++l) {
    std::size_t out = rng.choice(kChannels);
    std::size_t k = rng.choice(kKernels);
    LayerSpec s = conv_layer(in, out, {k, k}, rng.choice(kActs));
    if (l >= 3 && rng.bernoulli(cfg.skip_probability)) s.residual_source = rng.index(l - 1);
    s.pool = spatial >= 2;
    if (s.pool) spatial /= 2;
    in = s.out_dim;
    spec.push_back(s);
  }
  spec.push_back(linear_layer(in, kNumShapeFamilies, Activation::identity));
  return spec;
}

double accuracy(const Checkpoint& net, const ImageSet& set) {
  Tensor logits = evaluate(net, set.images);
  std::size_t n = logits.dim(0), c = logits.dim(1), correct = 0;
  auto d = logits.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k)
      if (d[i * c + k] > d[i * c + best]) best = k;
    if (best == set.labels[i]) ++correct;
  }
  return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
}

std::vector<ZooMember> generate_wild_park_mini(ad::Rng& rng, std::size_t count, const WildParkConfig& cfg) {
  std::vector<ZooMember> out;
  if (count == 0) return out;
  ad::Rng base(rng.next_u64());
  ad::Rng data_rng = base.derive(0);
  ImageSet train_set = make_toy_image_set(cfg.train_per_class, cfg.image_size, cfg.noise, data_rng);
  ImageSet test_set = make_toy_image_set(cfg.test_per_class, cfg.image_size, cfg.noise, data_rng);
  std::size_t n_train = train_set.labels.size();
  std::size_t pixels = cfg.image_size * cfg.image_size;

  for (std::size_t run = 0; out.size() < count; ++run) {
    ad::Rng r = base.derive(run + 1);
    Checkpoint net = init_checkpoint(sample_cnn_spec(r, cfg), r);
    std::size_t total = cfg.min_steps + r.index(cfg.max_steps - cfg.min_steps + 1);
    double lr = std::exp(r.uniform(std::log(1e-3), std::log(3e-2)));
    NetworkTensors tensors = make_tensors(net, true);
    auto params = tensors.trainable();
    train::AdamState state;
    train::AdamConfig adam{.lr = lr};
    std::size_t next_ckpt = 1;
    for (std::size_t step = 1; step <= total && out.size() < count; ++step) {
      std::vector<double> xb;
      ad::Index yb;
      xb.reserve(cfg.batch * pixels);
      for (std::size_t b = 0; b < cfg.batch; ++b) {
        std::size_t i = r.index(n_train);
        auto img = train_set.images.data().subspan(i * pixels, pixels);
        xb.insert(xb.end(), img.begin(), img.end());
        yb.push_back(train_set.labels[i]);
      }
      Tensor x = Tensor::from({cfg.batch, 1, cfg.image_size, cfg.image_size}, std::move(xb));
      Tensor loss = ad::cross_entropy(forward(net.spec, tensors, x), yb);
      loss.backward();
      train::adam_step(params, state, adam);
      if (step * cfg.checkpoints_per_run >= next_ckpt * total) {
        Checkpoint snap = net;
        write_back(snap, tensors);
        ZooMember m;
        m.accuracy = accuracy(snap, test_set);
        m.lineage = run;
        snap.metadata["test_accuracy"] = util::format_double(m.accuracy);
        snap.metadata["run"] = std::to_string(run);
        snap.metadata["step"] = std::to_string(step);
        snap.metadata["lr"] = util::format_double(lr);
        m.net = std::move(snap);
        out.push_back(std::move(m));
        ++next_ckpt;
      }
    }
  }
  return out;
}

}  // namespace ngraph::zoo
