#include <Eigen/Core>
#include <algorithm>

#include "ngraph/autodiff/ops.hpp"

namespace ngraph::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

struct ConvGeom {
  std::size_t b, c, h, w, o, kh, kw, pt, pl;
  std::size_t ck() const { return c * kh * kw; }
  std::size_t hw() const { return h * w; }
};

void im2col(const double* x, const ConvGeom& g, double* cols) {
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = cols + ((c * g.kh + i) * g.kw + j) * g.hw();
        for (std::size_t y = 0; y < g.h; ++y) {
          long sy = static_cast<long>(y + i) - static_cast<long>(g.pt);
          for (std::size_t xx = 0; xx < g.w; ++xx) {
            long sx = static_cast<long>(xx + j) - static_cast<long>(g.pl);
            bool in = sy >= 0 && sy < static_cast<long>(g.h) && sx >= 0 && sx < static_cast<long>(g.w);
            row[y * g.w + xx] = in ? x[(c * g.h + sy) * g.w + sx] : 0.0;
          }
        }
      }
}

void col2im(const double* cols, const ConvGeom& g, double* dx) {
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = cols + ((c * g.kh + i) * g.kw + j) * g.hw();
        for (std::size_t y = 0; y < g.h; ++y) {
          long sy = static_cast<long>(y + i) - static_cast<long>(g.pt);
          if (sy < 0 || sy >= static_cast<long>(g.h)) continue;
          for (std::size_t xx = 0; xx < g.w; ++xx) {
            long sx = static_cast<long>(xx + j) - static_cast<long>(g.pl);
            if (sx < 0 || sx >= static_cast<long>(g.w)) continue;
            dx[(c * g.h + sy) * g.w + sx] += row[y * g.w + xx];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 4 || weight.rank() != 4)
    throw ShapeError("conv2d: expected [B,C,H,W] input and [O,C,kh,kw] kernel, got " + shape_str(x.shape()) + " and " +
                     shape_str(weight.shape()));
  if (weight.dim(1) != x.dim(1))
    throw ShapeError("conv2d: kernel expects " + std::to_string(weight.dim(1)) + " input channels, input has " +
                     std::to_string(x.dim(1)));
  if (bias.size() != weight.dim(0))
    throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) + " for " + std::to_string(weight.dim(0)) +
                     " filters");
  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2), weight.dim(3), 0, 0};
  g.pt = (g.kh - 1) / 2;
  g.pl = (g.kw - 1) / 2;

  auto cols = std::make_shared<std::vector<double>>(g.b * g.ck() * g.hw());
  std::vector<double> out(g.b * g.o * g.hw());
  CMap wm(weight.data().data(), g.o, g.ck());
  auto bd = bias.data();
  for (std::size_t n = 0; n < g.b; ++n) {
    double* cb = cols->data() + n * g.ck() * g.hw();
    im2col(x.data().data() + n * g.c * g.hw(), g, cb);
    MMap om(out.data() + n * g.o * g.hw(), g.o, g.hw());
    om.noalias() = wm * CMap(cb, g.ck(), g.hw());
    for (std::size_t o = 0; o < g.o; ++o) om.row(o).array() += bd[o];
  }
  return make_result({g.b, g.o, g.h, g.w}, std::move(out), {x, weight, bias}, [g, cols](Node& self) {
    bool tx = self.parents[0]->requires_grad, tw = self.parents[1]->requires_grad, tb = self.parents[2]->requires_grad;
    CMap wm(self.parents[1]->data.data(), g.o, g.ck());
    RowMat dcols;
    for (std::size_t n = 0; n < g.b; ++n) {
      CMap gm(self.grad.data() + n * g.o * g.hw(), g.o, g.hw());
      const double* cb = cols->data() + n * g.ck() * g.hw();
      if (tw) MMap(self.parents[1]->grad.data(), g.o, g.ck()).noalias() += gm * CMap(cb, g.ck(), g.hw()).transpose();
      if (tb) {
        auto& gb = self.parents[2]->grad;
        for (std::size_t o = 0; o < g.o; ++o) gb[o] += gm.row(o).sum();
      }
      if (tx) {
        dcols.noalias() = wm.transpose() * gm;
        col2im(dcols.data(), g, self.parents[0]->grad.data() + n * g.c * g.hw());
      }
    }
  });
}

Tensor avg_pool2d(const Tensor& x, std::size_t factor) {
  if (x.rank() != 4) throw ShapeError("avg_pool2d: expected [B,C,H,W], got " + shape_str(x.shape()));
  if (factor == 0) throw std::invalid_argument("avg_pool2d: factor must be positive");
  if (factor == 1) return x;
  std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  std::size_t oh = h / factor, ow = w / factor;
  if (oh == 0 || ow == 0)
    throw ShapeError("avg_pool2d: spatial size " + shape_str(x.shape()) + " too small for factor " + std::to_string(factor));
  double inv = 1.0 / static_cast<double>(factor * factor);
  std::vector<double> out(b * c * oh * ow, 0.0);
  auto xd = x.data();
  for (std::size_t p = 0; p < b * c; ++p)
    for (std::size_t y = 0; y < oh * factor; ++y)
      for (std::size_t xx = 0; xx < ow * factor; ++xx)
        out[(p * oh + y / factor) * ow + xx / factor] += inv * xd[(p * h + y) * w + xx];
  return make_result({b, c, oh, ow}, std::move(out), {x}, [=](Node& self) {
    auto& gx = self.parents[0]->grad;
    for (std::size_t p = 0; p < b * c; ++p)
      for (std::size_t y = 0; y < oh * factor; ++y)
        for (std::size_t xx = 0; xx < ow * factor; ++xx)
          gx[(p * h + y) * w + xx] += inv * self.grad[(p * oh + y / factor) * ow + xx / factor];
  });
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("global_avg_pool: expected [B,C,H,W], got " + shape_str(x.shape()));
  std::size_t b = x.dim(0), c = x.dim(1);
  return reduce(ReduceOp::mean, reshape(x, {b, c, x.dim(2) * x.dim(3)}), 2);
}

Tensor residual_add(const Tensor& z, const Tensor& src) {
  if (z.rank() != src.rank() || (z.rank() != 2 && z.rank() != 4) || z.dim(0) != src.dim(0))
    throw ShapeError("residual_add: incompatible shapes " + shape_str(z.shape()) + " and " + shape_str(src.shape()));
  Tensor s = src;
  if (z.rank() == 4) {
    if (src.dim(2) % z.dim(2) != 0 || src.dim(3) % z.dim(3) != 0 || src.dim(2) / z.dim(2) != src.dim(3) / z.dim(3))
      throw ShapeError("residual_add: source spatial size " + shape_str(src.shape()) + " is not an integer multiple of " +
                       shape_str(z.shape()));
    s = avg_pool2d(src, src.dim(2) / z.dim(2));
  }
  std::size_t b = z.dim(0), cz = z.dim(1), cs = s.dim(1);
  std::size_t k = std::min(cz, cs);
  std::size_t sp = z.size() / (b * cz);
  std::vector<double> out(z.data().begin(), z.data().end());
  auto sd = s.data();
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t p = 0; p < sp; ++p) out[(n * cz + c) * sp + p] += sd[(n * cs + c) * sp + p];
  return make_result(z.shape(), std::move(out), {z, s}, [=](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& gz = self.parents[0]->grad;
      for (std::size_t i = 0; i < gz.size(); ++i) gz[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& gs = self.parents[1]->grad;
      for (std::size_t n = 0; n < b; ++n)
        for (std::size_t c = 0; c < k; ++c)
          for (std::size_t p = 0; p < sp; ++p) gs[(n * cs + c) * sp + p] += self.grad[(n * cz + c) * sp + p];
    }
  });
}

}  // namespace ngraph::ad
