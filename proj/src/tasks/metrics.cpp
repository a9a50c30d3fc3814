#include "ngraph/tasks/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace ngraph::tasks {

namespace {

std::int64_t pairs(std::int64_t t) { return t * (t - 1) / 2; }

/// Sum of t(t-1)/2 over runs of equal values in an already sorted sequence.
template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq equal) {
  std::int64_t total = 0, run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (equal(i - 1, i)) {
      ++run;
    } else {
      total += pairs(run);
      run = 1;
    }
  }
  return total + pairs(run);
}

/// Sorts v ascending and returns the number of strictly inverted pairs.
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

double kendall_tau(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw TaskError("kendall tau: " + std::to_string(pred.size()) + " predictions for " +
                    std::to_string(truth.size()) + " targets");
  std::size_t n = pred.size();
  if (n < 2) throw TaskError("kendall tau needs at least two values");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(pred[i]) || !std::isfinite(truth[i])) throw TaskError("kendall tau: non-finite value");

  // Knight's algorithm: sort by (pred, truth), count inversions of truth
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pred[a] < pred[b] || (pred[a] == pred[b] && truth[a] < truth[b]);
  });
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = pred[order[i]];
    y[i] = truth[order[i]];
  }
  std::int64_t total = pairs(static_cast<std::int64_t>(n));
  std::int64_t tie_x = tied_pairs(n, [&](std::size_t a, std::size_t b) { return x[a] == x[b]; });
  std::int64_t tie_xy = tied_pairs(n, [&](std::size_t a, std::size_t b) { return x[a] == x[b] && y[a] == y[b]; });
  std::vector<double> buf(n);
  std::int64_t swaps = merge_count(y, buf, 0, n);
  std::int64_t tie_y = tied_pairs(n, [&](std::size_t a, std::size_t b) { return y[a] == y[b]; });

  if (tie_x == total || tie_y == total) throw TaskError("kendall tau is undefined when one side is constant");
  // concordant - discordant
  std::int64_t score = total - tie_x - tie_y + tie_xy - 2 * swaps;
  double denom = std::sqrt(static_cast<double>(total - tie_x) * static_cast<double>(total - tie_y));
  return static_cast<double>(score) / denom;
}

double kendall_tau_or_zero(std::span<const double> pred, std::span<const double> truth) {
  auto constant = [](std::span<const double> v) {
    return v.size() >= 2 && std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
  };
  if (pred.size() == truth.size() && (constant(pred) || constant(truth))) return 0.0;
  return kendall_tau(pred, truth);
}

double accuracy(const ad::Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size())
    throw TaskError("accuracy: logits rows do not match " + std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw TaskError("accuracy of an empty set");
  std::size_t c = logits.dim(1), correct = 0;
  auto d = logits.data();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto row = d.subspan(i * c, c);
    auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double mean_squared_error(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw TaskError("mean squared error: sizes " + std::to_string(pred.size()) + " and " + std::to_string(truth.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

}  // namespace ngraph::tasks
