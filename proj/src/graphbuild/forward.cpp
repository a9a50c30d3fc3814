#include "ngraph/graphbuild/forward.hpp"

#include <algorithm>

#include "ngraph/autodiff/ops.hpp"

namespace ngraph::graph {

using ad::Tensor;

namespace {

/// Batch of feature maps held by one node.
struct Map {
  std::size_t h = 1, w = 1;
  std::vector<double> v;  // batch x h x w

  std::size_t area() const { return h * w; }
};

Map pooled(const Map& m, std::size_t factor, std::size_t batch) {
  if (factor == 1) return m;
  Map out{m.h / factor, m.w / factor, {}};
  if (out.h == 0 || out.w == 0) throw GraphError("feature map too small to pool");
  out.v.assign(batch * out.area(), 0.0);
  double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t y = 0; y < out.h * factor; ++y)
      for (std::size_t x = 0; x < out.w * factor; ++x)
        out.v[(b * out.h + y / factor) * out.w + x / factor] += m.v[(b * m.h + y) * m.w + x] * inv;
  return out;
}

double spatial_mean(const Map& m, std::size_t b) {
  double s = 0.0;
  for (std::size_t k = 0; k < m.area(); ++k) s += m.v[b * m.area() + k];
  return s / static_cast<double>(m.area());
}

/// out += cross-correlation of `src` with a window-sized kernel, zero padded.
void correlate(const Map& src, std::span<const double> kernel, const GraphLayout& lay, std::size_t batch, Map& out) {
  long ph = static_cast<long>((lay.window_height - 1) / 2), pw = static_cast<long>((lay.window_width - 1) / 2);
  long h = static_cast<long>(src.h), w = static_cast<long>(src.w);
  for (std::size_t r = 0; r < lay.window_height; ++r)
    for (std::size_t q = 0; q < lay.window_width; ++q) {
      double k = kernel[r * lay.window_width + q];
      if (k == 0.0) continue;
      for (std::size_t b = 0; b < batch; ++b)
        for (long y = 0; y < h; ++y) {
          long sy = y + static_cast<long>(r) - ph;
          if (sy < 0 || sy >= h) continue;
          for (long x = 0; x < w; ++x) {
            long sx = x + static_cast<long>(q) - pw;
            if (sx < 0 || sx >= w) continue;
            out.v[(b * src.h + y) * src.w + x] += k * src.v[(b * src.h + sy) * src.w + sx];
          }
        }
    }
}

}  // namespace

Tensor forward_on_graph(const NeuralGraph& g, const Tensor& input) {
  check_graph(g);
  if (g.layout.normalized) throw GraphError("cannot run a normalized graph; denormalize it first");
  if (g.spec.empty()) throw GraphError("graph has no source architecture");
  for (const Band& b : g.bands)
    if (b.kind == BandKind::heads) throw GraphError("attention graphs cannot be executed: softmax attention is not encoded");
  for (auto a : g.node_activation)
    if (static_cast<std::size_t>(a) >= zoo::kNumActivations)
      throw GraphError("node has unbound activation id " + std::to_string(static_cast<int>(a)));

  // bring the input into [B, C, H, W]
  const Band& in = g.bands.front();
  bool conv_input = g.spec.front().kind == LayerKind::conv2d;
  Tensor x = input;
  bool unbatched = x.rank() == (conv_input ? 3u : 1u);
  std::size_t want_rank = conv_input ? 4 : 2;
  if (unbatched) {
    ad::Shape sh{1};
    sh.insert(sh.end(), x.shape().begin(), x.shape().end());
    x = ad::reshape(x, sh);
  }
  if (x.rank() != want_rank || x.dim(1) != in.channels)
    throw GraphError("input of shape " + ad::shape_str(input.shape()) + " does not fit " + std::to_string(in.channels) +
                     " input nodes");
  std::size_t batch = x.dim(0);
  std::size_t h0 = conv_input ? x.dim(2) : 1, w0 = conv_input ? x.dim(3) : 1;

  std::vector<Map> val(g.num_nodes);
  for (std::size_t c = 0; c < in.channels; ++c) {
    Map m{h0, w0, std::vector<double>(batch * h0 * w0)};
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < h0 * w0; ++k) m.v[b * h0 * w0 + k] = x.data()[(b * in.channels + c) * h0 * w0 + k];
    val[in.first + c] = std::move(m);
  }

  std::vector<std::vector<std::size_t>> incoming(g.num_nodes);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    if (g.edge_backward[e]) continue;
    if (g.node_band[g.edge_src[e]] >= g.node_band[g.edge_dst[e]])
      throw GraphError("edge " + std::to_string(e) + " does not point forward; graph has a cycle");
    incoming[g.edge_dst[e]].push_back(e);
  }

  const GraphLayout& lay = g.layout;
  for (std::size_t bi = 1; bi < g.bands.size(); ++bi) {
    const Band& band = g.bands[bi];
    const zoo::LayerSpec& s = g.spec.at(band.layer - 1);
    for (std::size_t j = band.first; j < band.first + band.size(); ++j) {
      Map z;
      if (s.kind == LayerKind::conv2d || s.kind == LayerKind::norm)
        for (std::size_t e : incoming[j])
          if (g.edge_kind[e] == EdgeKind::weight) {
            z.h = val[g.edge_src[e]].h;
            z.w = val[g.edge_src[e]].w;
            break;
          }
      z.v.assign(batch * z.area(), g.node_row(j)[0]);
      for (std::size_t e : incoming[j]) {
        const Map& src = val[g.edge_src[e]];
        auto f = g.edge_row(e).first(lay.base_edge_dim);
        switch (g.edge_kind[e]) {
          case EdgeKind::weight:
            if (s.kind == LayerKind::conv2d) {
              if (src.h != z.h || src.w != z.w) throw GraphError("conv inputs of node " + std::to_string(j) + " differ in size");
              correlate(src, f, lay, batch, z);
            } else if (s.kind == LayerKind::linear) {
              // repeated copies pick their location; virtual nodes already hold a scalar
              bool spatial_src = g.bands[g.node_band[g.edge_src[e]]].spatial > 1 && src.area() > 1;
              for (std::size_t b = 0; b < batch; ++b) {
                double xi = spatial_src ? src.v[b * src.area() + g.node_spatial[g.edge_src[e]]] : spatial_mean(src, b);
                z.v[b] += f[lay.linear_slot] * xi;
              }
            } else {
              for (std::size_t k = 0; k < z.v.size(); ++k) z.v[k] += f[lay.scalar_slot] * src.v[k];
            }
            break;
          case EdgeKind::virtual_link:
            for (std::size_t b = 0; b < batch; ++b)
              z.v[b] += f[lay.scalar_slot] * src.v[b * src.area() + g.node_spatial[j]];
            break;
          case EdgeKind::residual: {
            Map p = pooled(src, src.h / z.h, batch);
            if (p.area() != z.area()) throw GraphError("residual source does not pool to the destination size");
            for (std::size_t k = 0; k < z.v.size(); ++k) z.v[k] += f[lay.scalar_slot] * p.v[k];
            break;
          }
        }
      }
      Tensor t = ad::elementwise(zoo::unary_op(g.node_activation[j]), Tensor::vector(std::move(z.v)));
      z.v = t.to_vector();
      val[j] = s.pool ? pooled(z, 2, batch) : std::move(z);
    }
  }

  const Band& out = g.bands.back();
  const Map& first = val[out.first];
  std::size_t area = first.area();
  std::vector<double> y(batch * out.channels * area);
  for (std::size_t c = 0; c < out.channels; ++c) {
    const Map& m = val[out.first + c * out.spatial];
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(m.v.begin() + b * area, area, y.begin() + (b * out.channels + c) * area);
  }
  bool spatial_out = conv_input;
  for (const auto& s : g.spec)
    if (s.kind == LayerKind::linear || s.kind == LayerKind::flatten) spatial_out = false;
  ad::Shape shape{batch, out.channels};
  if (spatial_out) shape = {batch, out.channels, first.h, first.w};
  if (unbatched) shape.erase(shape.begin());
  return Tensor::from(shape, std::move(y));
}

}  // namespace ngraph::graph
