#include "ngraph/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ngraph::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

std::vector<double>& pgrad(Node& self, std::size_t k) { return self.parents[k]->grad; }
const std::vector<double>& pdata(Node& self, std::size_t k) { return self.parents[k]->data; }
bool ptracks(Node& self, std::size_t k) { return self.parents[k]->requires_grad; }

void require_rank(const Tensor& t, std::size_t r, const char* op) {
  if (t.rank() != r)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(r) + ", got shape " +
                     shape_str(t.shape()));
}

// Index of x within the broadcast output, usable when x's non-unit shape is a
// suffix of the output shape.
bool suffix_compatible(const Shape& x, const Shape& out) {
  std::size_t lead = 0;
  while (lead < x.size() && x[lead] == 1) ++lead;
  std::size_t k = x.size() - lead;
  if (k > out.size()) return false;
  for (std::size_t i = 0; i < k; ++i)
    if (x[lead + i] != out[out.size() - k + i]) return false;
  return true;
}

std::vector<std::size_t> broadcast_index(const Shape& x, const Shape& out) {
  std::size_t r = out.size();
  std::vector<std::size_t> stride(r, 0);
  std::size_t s = 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t xi = x.size() - 1 - i;
    std::size_t oi = r - 1 - i;
    stride[oi] = x[xi] == 1 ? 0 : s;
    s *= x[xi];
  }
  std::size_t n = shape_size(out);
  std::vector<std::size_t> idx(n);
  std::vector<std::size_t> coord(r, 0);
  std::size_t cur = 0;
  for (std::size_t i = 0; i < n; ++i) {
    idx[i] = cur;
    for (std::size_t d = r; d-- > 0;) {
      ++coord[d];
      cur += stride[d];
      if (coord[d] < out[d]) break;
      cur -= stride[d] * coord[d];
      coord[d] = 0;
    }
  }
  return idx;
}

struct Broadcast {
  Shape out;
  std::size_t na = 0, nb = 0;
  bool fast = true;
  std::vector<std::size_t> ia, ib;

  Broadcast(const Shape& a, const Shape& b) : out(broadcast_shape(a, b)) {
    na = shape_size(a);
    nb = shape_size(b);
    fast = suffix_compatible(a, out) && suffix_compatible(b, out);
    if (!fast) {
      ia = broadcast_index(a, out);
      ib = broadcast_index(b, out);
    }
  }

  template <typename F>
  void each(F&& f) const {
    std::size_t n = shape_size(out);
    if (fast) {
      std::size_t a = 0, b = 0;
      for (std::size_t i = 0; i < n; ++i) {
        f(i, a, b);
        if (++a == na) a = 0;
        if (++b == nb) b = 0;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) f(i, ia[i], ib[i]);
    }
  }
};

double unary_value(UnaryOp op, double x) {
  switch (op) {
    case UnaryOp::identity: return x;
    case UnaryOp::relu: return x > 0.0 ? x : 0.0;
    case UnaryOp::gelu: return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    case UnaryOp::tanh: return std::tanh(x);
    case UnaryOp::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case UnaryOp::leaky_relu: return x > 0.0 ? x : kLeakySlope * x;
    case UnaryOp::sin: return std::sin(x);
    case UnaryOp::exp: return std::exp(x);
    case UnaryOp::log: return std::log(x);
    case UnaryOp::neg: return -x;
  }
  return x;
}

double unary_deriv(UnaryOp op, double x, double y) {
  switch (op) {
    case UnaryOp::identity: return 1.0;
    case UnaryOp::relu: return x > 0.0 ? 1.0 : 0.0;
    case UnaryOp::gelu: {
      double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
      double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
      return cdf + x * pdf;
    }
    case UnaryOp::tanh: return 1.0 - y * y;
    case UnaryOp::sigmoid: return y * (1.0 - y);
    case UnaryOp::leaky_relu: return x > 0.0 ? 1.0 : kLeakySlope;
    case UnaryOp::sin: return std::cos(x);
    case UnaryOp::exp: return y;
    case UnaryOp::log: return 1.0 / x;
    case UnaryOp::neg: return -1.0;
  }
  return 1.0;
}

}  // namespace

std::string_view to_string(UnaryOp op) {
  switch (op) {
    case UnaryOp::identity: return "identity";
    case UnaryOp::relu: return "relu";
    case UnaryOp::gelu: return "gelu";
    case UnaryOp::tanh: return "tanh";
    case UnaryOp::sigmoid: return "sigmoid";
    case UnaryOp::leaky_relu: return "leaky_relu";
    case UnaryOp::sin: return "sin";
    case UnaryOp::exp: return "exp";
    case UnaryOp::log: return "log";
    case UnaryOp::neg: return "neg";
  }
  return "?";
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    std::size_t da = i < a.size() ? a[a.size() - 1 - i] : 1;
    std::size_t db = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (da != db && da != 1 && db != 1)
      throw ShapeError("cannot broadcast shapes " + shape_str(a) + " and " + shape_str(b));
    out[r - 1 - i] = da == 1 ? db : da;
  }
  return out;
}

Tensor elementwise(UnaryOp op, const Tensor& a) {
  std::vector<double> out(a.size());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = unary_value(op, x[i]);
  return make_result(a.shape(), std::move(out), {a}, [op](Node& self) {
    const auto& x = pdata(self, 0);
    auto& gx = pgrad(self, 0);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += self.grad[i] * unary_deriv(op, x[i], self.data[i]);
  });
}

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  auto plan = std::make_shared<Broadcast>(a.shape(), b.shape());
  std::vector<double> out(shape_size(plan->out));
  auto x = a.data();
  auto y = b.data();
  switch (op) {
    case BinaryOp::add: plan->each([&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = x[ia] + y[ib]; }); break;
    case BinaryOp::sub: plan->each([&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = x[ia] - y[ib]; }); break;
    case BinaryOp::mul: plan->each([&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = x[ia] * y[ib]; }); break;
    case BinaryOp::div: plan->each([&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = x[ia] / y[ib]; }); break;
  }
  Shape shape = plan->out;
  return make_result(std::move(shape), std::move(out), {a, b}, [op, plan](Node& self) {
    const auto& x = pdata(self, 0);
    const auto& y = pdata(self, 1);
    bool ta = ptracks(self, 0), tb = ptracks(self, 1);
    auto& gx = self.parents[0]->grad;
    auto& gy = self.parents[1]->grad;
    const auto& g = self.grad;
    switch (op) {
      case BinaryOp::add:
        plan->each([&](std::size_t i, std::size_t ia, std::size_t ib) {
          if (ta) gx[ia] += g[i];
          if (tb) gy[ib] += g[i];
        });
        break;
      case BinaryOp::sub:
        plan->each([&](std::size_t i, std::size_t ia, std::size_t ib) {
          if (ta) gx[ia] += g[i];
          if (tb) gy[ib] -= g[i];
        });
        break;
      case BinaryOp::mul:
        plan->each([&](std::size_t i, std::size_t ia, std::size_t ib) {
          if (ta) gx[ia] += g[i] * y[ib];
          if (tb) gy[ib] += g[i] * x[ia];
        });
        break;
      case BinaryOp::div:
        plan->each([&](std::size_t i, std::size_t ia, std::size_t ib) {
          if (ta) gx[ia] += g[i] / y[ib];
          if (tb) gy[ib] -= g[i] * x[ia] / (y[ib] * y[ib]);
        });
        break;
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= c;
  return make_result(a.shape(), std::move(out), {a}, [c](Node& self) {
    auto& gx = pgrad(self, 0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += c * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v += c;
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    auto& gx = pgrad(self, 0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * p, 0.0);
  if (m && p && k) MMap(out.data(), m, p).noalias() = CMap(a.data().data(), m, k) * CMap(b.data().data(), k, p);
  return make_result({m, p}, std::move(out), {a, b}, [m, k, p](Node& self) {
    if (!(m && p && k)) return;
    CMap g(self.grad.data(), m, p);
    if (ptracks(self, 0))
      MMap(pgrad(self, 0).data(), m, k).noalias() += g * CMap(pdata(self, 1).data(), k, p).transpose();
    if (ptracks(self, 1))
      MMap(pgrad(self, 1).data(), k, p).noalias() += CMap(pdata(self, 0).data(), m, k).transpose() * g;
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  auto x = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    auto& gx = pgrad(self, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += self.grad[j * m + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    auto& gx = pgrad(self, 0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor reduce(ReduceOp op, const Tensor& a, std::size_t axis) {
  if (axis >= a.rank())
    throw ShapeError("reduce: axis " + std::to_string(axis) + " out of range for shape " + shape_str(a.shape()));
  const Shape& s = a.shape();
  std::size_t n = s[axis];
  if (n == 0) throw ShapeError("reduce: empty reduction axis in shape " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape os;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) os.push_back(s[i]);
  if (os.empty()) os.push_back(1);

  auto x = a.data();
  std::vector<double> out(outer * inner, 0.0);
  auto arg = std::make_shared<std::vector<std::size_t>>();
  auto mean = std::make_shared<std::vector<double>>();
  auto at = [=](std::size_t o, std::size_t j, std::size_t i) { return (o * n + j) * inner + i; };
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      double acc = 0.0;
      switch (op) {
        case ReduceOp::sum:
        case ReduceOp::mean:
          for (std::size_t j = 0; j < n; ++j) acc += x[at(o, j, i)];
          if (op == ReduceOp::mean) acc /= static_cast<double>(n);
          break;
        case ReduceOp::max: {
          std::size_t best = 0;
          for (std::size_t j = 1; j < n; ++j)
            if (x[at(o, j, i)] > x[at(o, best, i)]) best = j;
          acc = x[at(o, best, i)];
          arg->push_back(best);
          break;
        }
        case ReduceOp::std: {
          double mu = 0.0;
          for (std::size_t j = 0; j < n; ++j) mu += x[at(o, j, i)];
          mu /= static_cast<double>(n);
          double var = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            double d = x[at(o, j, i)] - mu;
            var += d * d;
          }
          var /= static_cast<double>(n);
          acc = std::sqrt(var + kStdEps);
          mean->push_back(mu);
          break;
        }
      }
      out[o * inner + i] = acc;
    }
  return make_result(std::move(os), std::move(out), {a}, [=](Node& self) {
    auto& gx = pgrad(self, 0);
    const auto& xd = pdata(self, 0);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        std::size_t oi = o * inner + i;
        double g = self.grad[oi];
        switch (op) {
          case ReduceOp::sum:
            for (std::size_t j = 0; j < n; ++j) gx[at(o, j, i)] += g;
            break;
          case ReduceOp::mean:
            for (std::size_t j = 0; j < n; ++j) gx[at(o, j, i)] += g / static_cast<double>(n);
            break;
          case ReduceOp::max: gx[at(o, (*arg)[oi], i)] += g; break;
          case ReduceOp::std: {
            double sd = self.data[oi];
            double mu = (*mean)[oi];
            for (std::size_t j = 0; j < n; ++j)
              gx[at(o, j, i)] += g * (xd[at(o, j, i)] - mu) / (static_cast<double>(n) * sd);
            break;
          }
        }
      }
  });
}

Tensor sum_all(const Tensor& a) { return reduce(ReduceOp::sum, reshape(a, {a.size()}), 0); }
Tensor mean_all(const Tensor& a) { return reduce(ReduceOp::mean, reshape(a, {a.size()}), 0); }

namespace {
std::pair<std::size_t, std::size_t> rows_cols(const Tensor& a, const char* op) {
  if (a.rank() == 1) return {a.dim(0), 1};
  require_rank(a, 2, op);
  return {a.dim(0), a.dim(1)};
}
}  // namespace

Tensor gather_rows(const Tensor& a, const Index& rows) {
  auto [n, h] = rows_cols(a, "gather_rows");
  auto idx = std::make_shared<Index>(rows);
  std::vector<double> out(rows.size() * h);
  auto x = a.data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) throw std::out_of_range("gather_rows: row index " + std::to_string(rows[r]) + " >= " + std::to_string(n));
    std::copy_n(x.begin() + rows[r] * h, h, out.begin() + r * h);
  }
  Shape os = a.rank() == 1 ? Shape{rows.size()} : Shape{rows.size(), h};
  return make_result(std::move(os), std::move(out), {a}, [idx, h](Node& self) {
    auto& gx = pgrad(self, 0);
    for (std::size_t r = 0; r < idx->size(); ++r) {
      const double* g = self.grad.data() + r * h;
      double* d = gx.data() + (*idx)[r] * h;
      for (std::size_t c = 0; c < h; ++c) d[c] += g[c];
    }
  });
}

namespace {
void check_segments(const Index& seg, std::size_t rows, std::size_t num, const char* op) {
  if (seg.size() != rows)
    throw ShapeError(std::string(op) + ": segment ids (" + std::to_string(seg.size()) + ") do not match rows (" +
                     std::to_string(rows) + ")");
  for (auto s : seg)
    if (s >= num) throw std::out_of_range(std::string(op) + ": segment id " + std::to_string(s) + " >= " + std::to_string(num));
}
}  // namespace

Tensor segment_sum(const Tensor& a, const Index& segment, std::size_t num_segments) {
  auto [p, h] = rows_cols(a, "segment_sum");
  check_segments(segment, p, num_segments, "segment_sum");
  auto seg = std::make_shared<Index>(segment);
  std::vector<double> out(num_segments * h, 0.0);
  auto x = a.data();
  for (std::size_t r = 0; r < p; ++r) {
    double* d = out.data() + segment[r] * h;
    const double* s = x.data() + r * h;
    for (std::size_t c = 0; c < h; ++c) d[c] += s[c];
  }
  Shape os = a.rank() == 1 ? Shape{num_segments} : Shape{num_segments, h};
  return make_result(std::move(os), std::move(out), {a}, [seg, h](Node& self) {
    auto& gx = pgrad(self, 0);
    for (std::size_t r = 0; r < seg->size(); ++r) {
      const double* g = self.grad.data() + (*seg)[r] * h;
      double* d = gx.data() + r * h;
      for (std::size_t c = 0; c < h; ++c) d[c] += g[c];
    }
  });
}

Tensor segment_mean(const Tensor& a, const Index& segment, std::size_t num_segments) {
  auto [p, h] = rows_cols(a, "segment_mean");
  check_segments(segment, p, num_segments, "segment_mean");
  std::vector<double> inv(num_segments, 0.0);
  for (auto s : segment) inv[s] += 1.0;
  for (auto& c : inv) c = c > 0.0 ? 1.0 / c : 0.0;
  Tensor sum = segment_sum(a, segment, num_segments);
  Shape ws = a.rank() == 1 ? Shape{num_segments} : Shape{num_segments, 1};
  return sum * Tensor::from(ws, std::move(inv));
}

Tensor segment_max(const Tensor& a, const Index& segment, std::size_t num_segments) {
  auto [p, h] = rows_cols(a, "segment_max");
  check_segments(segment, p, num_segments, "segment_max");
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  auto arg = std::make_shared<Index>(num_segments * h, none);
  std::vector<double> out(num_segments * h, 0.0);
  auto x = a.data();
  for (std::size_t r = 0; r < p; ++r) {
    std::size_t s = segment[r];
    for (std::size_t c = 0; c < h; ++c) {
      std::size_t o = s * h + c;
      double v = x[r * h + c];
      if ((*arg)[o] == none || v > out[o]) {
        out[o] = v;
        (*arg)[o] = r;
      }
    }
  }
  Shape os = a.rank() == 1 ? Shape{num_segments} : Shape{num_segments, h};
  return make_result(std::move(os), std::move(out), {a}, [arg, h](Node& self) {
    auto& gx = pgrad(self, 0);
    for (std::size_t o = 0; o < arg->size(); ++o)
      if ((*arg)[o] != none) gx[(*arg)[o] * h + o % h] += self.grad[o];
  });
}

Tensor segment_softmax(const Tensor& a, const Index& segment, std::size_t num_segments) {
  auto [p, h] = rows_cols(a, "segment_softmax");
  check_segments(segment, p, num_segments, "segment_softmax");
  auto seg = std::make_shared<Index>(segment);
  std::vector<double> mx(num_segments * h, -std::numeric_limits<double>::infinity());
  auto x = a.data();
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < h; ++c) mx[segment[r] * h + c] = std::max(mx[segment[r] * h + c], x[r * h + c]);
  std::vector<double> out(p * h);
  std::vector<double> z(num_segments * h, 0.0);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < h; ++c) {
      double e = std::exp(x[r * h + c] - mx[segment[r] * h + c]);
      out[r * h + c] = e;
      z[segment[r] * h + c] += e;
    }
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < h; ++c) out[r * h + c] /= z[segment[r] * h + c];
  return make_result(a.shape(), std::move(out), {a}, [seg, h, num_segments](Node& self) {
    auto& gx = pgrad(self, 0);
    std::vector<double> dot(num_segments * h, 0.0);
    std::size_t p = seg->size();
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < h; ++c) dot[(*seg)[r] * h + c] += self.grad[r * h + c] * self.data[r * h + c];
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < h; ++c) {
        std::size_t i = r * h + c;
        gx[i] += self.data[i] * (self.grad[i] - dot[(*seg)[r] * h + c]);
      }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  std::size_t n = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& t : parts) {
    require_rank(t, 2, "concat_cols");
    if (t.dim(0) != n)
      throw ShapeError("concat_cols: row counts differ, " + shape_str(parts[0].shape()) + " vs " + shape_str(t.shape()));
    widths.push_back(t.dim(1));
    total += t.dim(1);
  }
  std::vector<double> out(n * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto x = parts[k].data();
    std::size_t w = widths[k];
    for (std::size_t r = 0; r < n; ++r) std::copy_n(x.begin() + r * w, w, out.begin() + r * total + off);
    off += w;
  }
  std::vector<Tensor> ps(parts.begin(), parts.end());
  return make_result({n, total}, std::move(out), ps, [widths, n, total](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      std::size_t w = widths[k];
      if (ptracks(self, k)) {
        auto& gx = pgrad(self, k);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < w; ++c) gx[r * w + c] += self.grad[r * total + off + c];
      }
      off += w;
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  std::size_t w = parts[0].rank() == 2 ? parts[0].dim(1) : 1;
  std::size_t rows = 0;
  std::vector<std::size_t> sizes;
  for (const auto& t : parts) {
    std::size_t tw = t.rank() == 2 ? t.dim(1) : 1;
    if (t.rank() > 2 || tw != w || t.rank() != parts[0].rank())
      throw ShapeError("concat_rows: column counts differ, " + shape_str(parts[0].shape()) + " vs " + shape_str(t.shape()));
    rows += t.dim(0);
    sizes.push_back(t.size());
  }
  std::vector<double> out;
  out.reserve(rows * w);
  for (const auto& t : parts) out.insert(out.end(), t.data().begin(), t.data().end());
  Shape os = parts[0].rank() == 2 ? Shape{rows, w} : Shape{rows};
  std::vector<Tensor> ps(parts.begin(), parts.end());
  return make_result(std::move(os), std::move(out), ps, [sizes](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (ptracks(self, k)) {
        auto& gx = pgrad(self, k);
        for (std::size_t i = 0; i < sizes[k]; ++i) gx[i] += self.grad[off + i];
      }
      off += sizes[k];
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank(a, 2, "slice_cols");
  std::size_t n = a.dim(0), w = a.dim(1);
  if (begin > end || end > w)
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                     shape_str(a.shape()));
  std::size_t k = end - begin;
  std::vector<double> out(n * k);
  auto x = a.data();
  for (std::size_t r = 0; r < n; ++r) std::copy_n(x.begin() + r * w + begin, k, out.begin() + r * k);
  return make_result({n, k}, std::move(out), {a}, [n, w, k, begin](Node& self) {
    auto& gx = pgrad(self, 0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < k; ++c) gx[r * w + begin + c] += self.grad[r * k + c];
  });
}

Tensor layer_norm_rows(const Tensor& a, double eps) {
  require_rank(a, 2, "layer_norm_rows");
  std::size_t n = a.dim(0), h = a.dim(1);
  auto inv = std::make_shared<std::vector<double>>(n);
  std::vector<double> out(n * h);
  auto x = a.data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = x.data() + r * h;
    double mu = 0.0;
    for (std::size_t c = 0; c < h; ++c) mu += row[c];
    mu /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t c = 0; c < h; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(h);
    double is = 1.0 / std::sqrt(var + eps);
    (*inv)[r] = is;
    for (std::size_t c = 0; c < h; ++c) out[r * h + c] = (row[c] - mu) * is;
  }
  return make_result({n, h}, std::move(out), {a}, [inv, n, h](Node& self) {
    auto& gx = pgrad(self, 0);
    for (std::size_t r = 0; r < n; ++r) {
      const double* g = self.grad.data() + r * h;
      const double* y = self.data.data() + r * h;
      double mg = 0.0, mgy = 0.0;
      for (std::size_t c = 0; c < h; ++c) {
        mg += g[c];
        mgy += g[c] * y[c];
      }
      mg /= static_cast<double>(h);
      mgy /= static_cast<double>(h);
      for (std::size_t c = 0; c < h; ++c) gx[r * h + c] += (*inv)[r] * (g[c] - mg - y[c] * mgy);
    }
  });
}

Tensor dropout(const Tensor& a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  std::vector<double> mask(a.size());
  double keep = 1.0 - rate;
  for (auto& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return a * Tensor::from(a.shape(), std::move(mask));
}

Tensor cross_entropy(const Tensor& logits, const Index& labels) {
  require_rank(logits, 2, "cross_entropy");
  std::size_t b = logits.dim(0), c = logits.dim(1);
  if (labels.size() != b)
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(b) + " rows");
  auto probs = std::make_shared<std::vector<double>>(b * c);
  auto x = logits.data();
  double loss = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    if (labels[r] >= c) throw std::out_of_range("cross_entropy: label out of range");
    const double* row = x.data() + r * c;
    double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(row[k] - mx);
    for (std::size_t k = 0; k < c; ++k) (*probs)[r * c + k] = std::exp(row[k] - mx) / z;
    loss -= row[labels[r]] - mx - std::log(z);
  }
  loss /= static_cast<double>(b);
  auto lab = std::make_shared<Index>(labels);
  return make_result({1}, {loss}, {logits}, [probs, lab, b, c](Node& self) {
    auto& gx = pgrad(self, 0);
    double g = self.grad[0] / static_cast<double>(b);
    for (std::size_t r = 0; r < b; ++r)
      for (std::size_t k = 0; k < c; ++k)
        gx[r * c + k] += g * ((*probs)[r * c + k] - (k == (*lab)[r] ? 1.0 : 0.0));
  });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse_loss: shapes differ, " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  Tensor d = pred - target;
  return mean_all(d * d);
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& target) {
  if (logits.shape() != target.shape())
    throw ShapeError("bce_with_logits: shapes differ, " + shape_str(logits.shape()) + " vs " +
                     shape_str(target.shape()));
  std::size_t n = logits.size();
  auto x = logits.data();
  auto t = target.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    loss += std::max(x[i], 0.0) - x[i] * t[i] + std::log1p(std::exp(-std::abs(x[i])));
  loss /= static_cast<double>(n);
  return make_result({1}, {loss}, {logits, target}, [n](Node& self) {
    const auto& x = pdata(self, 0);
    const auto& t = pdata(self, 1);
    double g = self.grad[0] / static_cast<double>(n);
    if (ptracks(self, 0)) {
      auto& gx = pgrad(self, 0);
      for (std::size_t i = 0; i < n; ++i) gx[i] += g * (1.0 / (1.0 + std::exp(-x[i])) - t[i]);
    }
    if (ptracks(self, 1)) {
      auto& gt = pgrad(self, 1);
      for (std::size_t i = 0; i < n; ++i) gt[i] -= g * x[i];
    }
  });
}

}  // namespace ngraph::ad
