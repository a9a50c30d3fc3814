#include "ngraph/trainer/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ngraph::train {

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: params and grads differ in count");
  if (state.m.empty()) {
    for (auto p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state belongs to a different parameter set");
  ++state.step;
  double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    auto g = grads[t];
    auto& m = state.m[t];
    auto& v = state.v[t];
    if (g.size() != p.size() || m.size() != p.size())
      throw std::invalid_argument("adam_step: gradient " + std::to_string(t) + " has the wrong length");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
      p[i] -= cfg.lr * (update + cfg.weight_decay * p[i]);
    }
  }
}

void adam_step(std::vector<ad::Tensor>& params, AdamState& state, const AdamConfig& cfg) {
  std::vector<std::vector<double>> zeros(params.size());
  std::vector<std::span<double>> p;
  std::vector<std::span<const double>> g;
  for (std::size_t i = 0; i < params.size(); ++i) {
    p.push_back(params[i].mutable_data());
    if (params[i].has_grad()) {
      g.push_back(params[i].grad());
    } else {
      zeros[i].assign(params[i].size(), 0.0);
      g.push_back(zeros[i]);
    }
  }
  adam_step(p, g, state, cfg);
  for (auto& t : params) t.zero_grad();
}

}  // namespace ngraph::train
