#include "ngraph/models/params.hpp"

#include <cmath>

namespace ngraph::models {

using ad::Tensor;

const Tensor& ParamStore::add(const std::string& name, ad::Shape shape, std::vector<double> values) {
  if (contains(name)) throw ModelError("parameter '" + name + "' is registered twice");
  names_.push_back(name);
  return tensors_[name] = Tensor::from(std::move(shape), std::move(values), true);
}

void ParamStore::add_linear(const std::string& prefix, std::size_t in, std::size_t out, ad::Rng& rng, bool bias) {
  double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(in, 1)));
  std::vector<double> w(in * out);
  for (auto& x : w) x = rng.uniform(-bound, bound);
  add(prefix + ".w", {in, out}, std::move(w));
  if (bias) add(prefix + ".b", {out}, std::vector<double>(out, 0.0));
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ModelError("no parameter named '" + name + "'");
  return it->second;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  for (const auto& n : names_) out.push_back(tensors_.at(n));
  return out;
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& n : names_) {
    const Tensor& t = tensors_.at(n);
    out.add(n, t.shape(), t.to_vector());
  }
  return out;
}

}  // namespace ngraph::models
