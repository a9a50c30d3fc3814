#pragma once

#include <span>
#include <stdexcept>

#include "ngraph/autodiff/tensor.hpp"

namespace ngraph::tasks {

class TaskError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Tie-corrected rank correlation (tau-b) in O(n log n). Throws TaskError
/// for unequal lengths, fewer than two values, non-finite values or a side
/// whose values are all equal.
double kendall_tau(std::span<const double> pred, std::span<const double> truth);

/// kendall_tau, but 0 when either side is constant (no ranking to compare,
/// e.g. a tiny split whose networks all reached the same accuracy).
double kendall_tau_or_zero(std::span<const double> pred, std::span<const double> truth);

/// Fraction of rows of `logits` [N, C] whose argmax equals the label.
double accuracy(const ad::Tensor& logits, std::span<const std::size_t> labels);

double mean_squared_error(std::span<const double> pred, std::span<const double> truth);

}  // namespace ngraph::tasks
