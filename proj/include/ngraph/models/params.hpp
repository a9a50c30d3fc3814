#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ngraph/autodiff/rng.hpp"
#include "ngraph/autodiff/tensor.hpp"

namespace ngraph::models {

class ModelError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Named trainable tensors in registration order.
class ParamStore {
public:
  /// Registers a leaf tensor; throws ModelError on a duplicate name.
  const ad::Tensor& add(const std::string& name, ad::Shape shape, std::vector<double> values);
  /// Weight [in, out] uniform in +-1/sqrt(in) and, optionally, a zero bias.
  void add_linear(const std::string& prefix, std::size_t in, std::size_t out, ad::Rng& rng, bool bias = true);

  const ad::Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }
  const std::vector<std::string>& names() const { return names_; }
  std::vector<ad::Tensor> tensors() const;
  std::size_t num_scalars() const;

  /// Deep copy (fresh leaves with the same values).
  ParamStore clone() const;

private:
  std::vector<std::string> names_;
  std::map<std::string, ad::Tensor> tensors_;
};

}  // namespace ngraph::models
