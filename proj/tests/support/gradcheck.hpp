#pragma once

// Fourth-order central finite differences, used as the independent oracle
// for every reverse-mode gradient in the test suites.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "ngraph/autodiff/tensor.hpp"

namespace ngraph::testkit {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

inline double rel_error(double a, double b) {
  double denom = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / denom;
}

/// `loss` must rebuild its graph from the current values of `inputs` on every
/// call. Perturbs each input entry by +-h and +-2h (five-point stencil) and
/// compares with backward().
inline GradCheckResult grad_check(std::vector<ad::Tensor> inputs, const std::function<ad::Tensor()>& loss,
                                  double h = 1e-4) {
  for (auto& t : inputs) t.zero_grad();
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  GradCheckResult r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto data = inputs[k].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      double saved = data[i];
      auto at = [&](double offset) {
        data[i] = saved + offset;
        return loss().item();
      };
      double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
      data[i] = saved;
      r.max_rel_error = std::max(r.max_rel_error, rel_error(analytic[k][i], numeric));
      r.max_abs_error = std::max(r.max_abs_error, std::abs(analytic[k][i] - numeric));
    }
  }
  return r;
}

}  // namespace ngraph::testkit
