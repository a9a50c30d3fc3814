#include "ngraph/netzoo/network.hpp"

#include <cmath>

namespace ngraph::zoo {

using ad::Shape;
using ad::Tensor;

std::vector<Tensor> NetworkTensors::trainable() const {
  std::vector<Tensor> out;
  for (const auto& l : layers)
    for (const Tensor* t : {&l.weight, &l.bias, &l.query, &l.key, &l.value})
      if (t->defined()) out.push_back(*t);
  return out;
}

NetworkTensors make_tensors(const Checkpoint& net, bool requires_grad) {
  NetworkTensors nt;
  for (std::size_t i = 0; i < net.spec.size(); ++i) {
    const LayerSpec& s = net.spec[i];
    const LayerParams& p = net.params[i];
    LayerTensors lt;
    switch (s.kind) {
      case LayerKind::linear:
        lt.weight = Tensor::from({s.out_dim, s.in_dim}, p.weight, requires_grad);
        lt.bias = Tensor::from({s.out_dim}, p.bias, requires_grad);
        break;
      case LayerKind::conv2d:
        lt.weight = Tensor::from({s.out_dim, s.in_dim, s.kernel->height, s.kernel->width}, p.weight, requires_grad);
        lt.bias = Tensor::from({s.out_dim}, p.bias, requires_grad);
        break;
      case LayerKind::norm:
        lt.weight = Tensor::from({s.out_dim}, p.weight, requires_grad);
        lt.bias = Tensor::from({s.out_dim}, p.bias, requires_grad);
        break;
      case LayerKind::attention: {
        std::size_t hd = s.heads * s.head_dim;
        lt.query = Tensor::from({hd, s.in_dim}, p.query, requires_grad);
        lt.key = Tensor::from({hd, s.in_dim}, p.key, requires_grad);
        lt.value = Tensor::from({hd, s.in_dim}, p.value, requires_grad);
        lt.weight = Tensor::from({s.out_dim, hd}, p.weight, requires_grad);
        lt.bias = Tensor::from({s.out_dim}, p.bias, requires_grad);
        break;
      }
      case LayerKind::flatten: break;
    }
    nt.layers.push_back(std::move(lt));
  }
  return nt;
}

void write_back(Checkpoint& net, const NetworkTensors& tensors) {
  for (std::size_t i = 0; i < net.spec.size(); ++i) {
    const LayerTensors& lt = tensors.layers[i];
    LayerParams& p = net.params[i];
    if (lt.weight.defined()) p.weight = lt.weight.to_vector();
    if (lt.bias.defined()) p.bias = lt.bias.to_vector();
    if (lt.query.defined()) p.query = lt.query.to_vector();
    if (lt.key.defined()) p.key = lt.key.to_vector();
    if (lt.value.defined()) p.value = lt.value.to_vector();
  }
}

namespace {

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) { return ad::matmul(x, ad::transpose(w)) + b; }

Tensor row_softmax(const Tensor& s) {
  std::size_t r = s.dim(0), c = s.dim(1);
  ad::Index seg(r * c);
  for (std::size_t i = 0; i < r * c; ++i) seg[i] = i / c;
  return ad::reshape(ad::segment_softmax(ad::reshape(s, {r * c, 1}), seg, r), {r, c});
}

Tensor attention(const LayerSpec& s, const LayerTensors& p, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != s.in_dim)
    throw ad::ShapeError("attention expects [T, " + std::to_string(s.in_dim) + "], got " + ad::shape_str(x.shape()));
  Tensor q = ad::matmul(x, ad::transpose(p.query));
  Tensor k = ad::matmul(x, ad::transpose(p.key));
  Tensor v = ad::matmul(x, ad::transpose(p.value));
  double scale = 1.0 / std::sqrt(static_cast<double>(s.head_dim));
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < s.heads; ++h) {
    std::size_t b = h * s.head_dim, e = b + s.head_dim;
    Tensor qh = ad::slice_cols(q, b, e), kh = ad::slice_cols(k, b, e), vh = ad::slice_cols(v, b, e);
    Tensor a = row_softmax(ad::scale(ad::matmul(qh, ad::transpose(kh)), scale));
    heads.push_back(ad::matmul(a, vh));
  }
  return dense(ad::concat_cols(heads), p.weight, p.bias);
}

}  // namespace

namespace {

/// Brings an input into batched layout; returns whether a batch axis was added.
bool batch_input(const LayerSpec& first, Tensor& x) {
  bool unbatched = false;
  if (first.kind == LayerKind::conv2d) {
    if (x.rank() == 3) {
      x = ad::reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
      unbatched = true;
    }
    if (x.rank() != 4 || x.dim(1) != first.in_dim)
      throw ad::ShapeError("conv net expects [B, " + std::to_string(first.in_dim) + ", H, W], got " +
                           ad::shape_str(x.shape()));
  } else if (first.kind == LayerKind::attention) {
    if (x.rank() != 2 || x.dim(1) != first.in_dim)
      throw ad::ShapeError("attention net expects [T, " + std::to_string(first.in_dim) + "], got " +
                           ad::shape_str(x.shape()));
  } else {
    if (x.rank() == 1) {
      x = ad::reshape(x, {1, x.dim(0)});
      unbatched = true;
    }
    if (x.rank() != 2 || x.dim(1) != first.in_dim)
      throw ad::ShapeError("dense net expects [B, " + std::to_string(first.in_dim) + "], got " +
                           ad::shape_str(x.shape()));
  }
  return unbatched;
}

std::vector<Tensor> run_layers(const std::vector<LayerSpec>& spec, const NetworkTensors& params, Tensor x) {
  std::vector<Tensor> outputs{x};
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const LayerSpec& s = spec[i];
    const LayerTensors& p = params.layers.at(i);
    Tensor z;
    switch (s.kind) {
      case LayerKind::conv2d:
        z = ad::conv2d(x, p.weight, p.bias);
        break;
      case LayerKind::flatten:
        if (x.rank() != 4 || x.dim(2) != s.spatial_height || x.dim(3) != s.spatial_width)
          throw ad::ShapeError("flatten expects a " + std::to_string(s.spatial_height) + "x" +
                               std::to_string(s.spatial_width) + " feature map, got " + ad::shape_str(x.shape()));
        z = ad::reshape(x, {x.dim(0), x.size() / x.dim(0)});
        break;
      case LayerKind::linear:
        if (x.rank() == 4) x = ad::global_avg_pool(x);
        z = dense(x, p.weight, p.bias);
        break;
      case LayerKind::norm:
        z = x * p.weight + p.bias;
        break;
      case LayerKind::attention:
        z = attention(s, p, x);
        break;
    }
    if (s.residual_source) z = ad::residual_add(z, outputs.at(*s.residual_source));
    Tensor y = s.kind == LayerKind::flatten ? z : ad::elementwise(unary_op(s.activation), z);
    if (s.pool) y = ad::avg_pool2d(y, 2);
    outputs.push_back(y);
    x = y;
  }
  return outputs;
}

}  // namespace

std::vector<Tensor> forward_all(const std::vector<LayerSpec>& spec, const NetworkTensors& params, const Tensor& input) {
  if (spec.empty()) throw CheckpointError("network has no layers");
  Tensor x = input;
  batch_input(spec.front(), x);
  return run_layers(spec, params, x);
}

Tensor forward(const std::vector<LayerSpec>& spec, const NetworkTensors& params, const Tensor& input) {
  if (spec.empty()) throw CheckpointError("network has no layers");
  Tensor x = input;
  bool unbatched = batch_input(spec.front(), x);
  x = run_layers(spec, params, x).back();
  if (unbatched && x.dim(0) == 1) {
    ad::Shape sh(x.shape().begin() + 1, x.shape().end());
    x = ad::reshape(x, sh);
  }
  return x;
}

Tensor evaluate(const Checkpoint& net, const Tensor& x) {
  validate(net);
  return forward(net.spec, make_tensors(net, false), x);
}

Checkpoint init_checkpoint(std::vector<LayerSpec> spec, ad::Rng& rng) {
  validate_spec(spec);
  Checkpoint net;
  auto fill = [&](std::size_t n, double bound) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return v;
  };
  for (const LayerSpec& s : spec) {
    LayerParams p;
    ParamShape ps = param_shape(s);
    switch (s.kind) {
      case LayerKind::linear:
      case LayerKind::conv2d: {
        std::size_t fan_in = ps.weight / s.out_dim;
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        p.weight = fill(ps.weight, bound);
        p.bias = fill(ps.bias, bound);
        break;
      }
      case LayerKind::norm:
        p.weight.assign(s.out_dim, 1.0);
        p.bias.assign(s.out_dim, 0.0);
        break;
      case LayerKind::attention: {
        double bq = 1.0 / std::sqrt(static_cast<double>(s.in_dim));
        p.query = fill(ps.projection, bq);
        p.key = fill(ps.projection, bq);
        p.value = fill(ps.projection, bq);
        double bo = 1.0 / std::sqrt(static_cast<double>(s.heads * s.head_dim));
        p.weight = fill(ps.weight, bo);
        p.bias = fill(ps.bias, bo);
        break;
      }
      case LayerKind::flatten: break;
    }
    net.params.push_back(std::move(p));
  }
  net.spec = std::move(spec);
  return net;
}

}  // namespace ngraph::zoo
