#include "ngraph/autodiff/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace ngraph::ad {

std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::vector(std::vector<double> data, bool requires_grad) {
  std::size_t n = data.size();
  return from({n}, std::move(data), requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) throw ShapeError("at(i,j) needs rank 2, got " + shape_str(shape()));
  return node_->data[i * node_->shape[1] + j];
}

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

Tensor Tensor::detach() const { return from(node_->shape, node_->data, false); }

void Tensor::backward() {
  Node& root = *node_;
  if (root.consumed) throw std::logic_error("backward() called twice on the same tape; run a new forward pass");
  if (root.data.size() != 1) throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(root.shape));
  if (!root.requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{&root, 0}};
  seen.insert(&root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        if (p->consumed) throw std::logic_error("backward() through a consumed tape; run a new forward pass");
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.ensure_grad();
  root.grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->leaf || !n->backward_fn) continue;
    n->ensure_grad();
    for (auto& p : n->parents)
      if (p->requires_grad) p->ensure_grad();
    n->backward_fn(*n);
  }
  for (Node* n : order) {
    if (n->leaf) continue;
    n->backward_fn = nullptr;
    n->parents.clear();
    n->consumed = true;
    if (n != &root) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->leaf = false;
  bool any = std::any_of(parents.begin(), parents.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (any) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node_ptr());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

}  // namespace ngraph::ad
