#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ngraph::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Tape record. Non-leaf nodes keep their parents alive until backward()
/// consumes them.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until touched by backward()
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

/// Dense row-major float64 array with reverse-mode gradient tracking.
///
/// Copies share the underlying node. Data is immutable once created except
/// through `mutable_data()`, which optimizers use on leaves between steps.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> data, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  std::vector<double> to_vector() const { return node_->data; }

  double item() const;
  double operator[](std::size_t i) const { return node_->data[i]; }
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  void zero_grad();

  /// Same values, no tape, no gradient.
  Tensor detach() const;

  /// Reverse pass from a scalar loss. Consumes the tape: a second call on the
  /// same graph without a fresh forward pass throws.
  void backward();

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

private:
  std::shared_ptr<Node> node_;
};

/// Creates a non-leaf result node. `backward_fn` is dropped when no parent
/// tracks gradients.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn);

}  // namespace ngraph::ad
