#pragma once

// Define-by-run reverse-mode automatic differentiation over dense
// double-precision arrays. A Tensor is a cheap handle to a shared graph node;
// every op records its parents and a closure that routes the output gradient
// back to them. Nodes that do not depend on a requires_grad tensor record
// nothing, so inference builds no graph.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace analogy {

using Shape = std::vector<std::size_t>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty when absent
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return parents.empty(); }
};

}  // namespace detail

class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const;
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  bool is_scalar() const { return numel() == 1; }

  std::span<const double> data() const { return node_->data; }
  // Mutable access is for leaves only (parameters, test perturbation).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat) const { return node_->data[flat]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad();
  void zero_grad();
  void clear_grad() { node_->grad.clear(); }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Accumulates d(this)/d(leaf) into every reachable requires_grad leaf.
  // Interior gradients are recomputed per call; leaf gradients add up.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node);

  std::shared_ptr<detail::Node> node_;
};

// Returns a leaf with the same values and no graph history.
Tensor detach(const Tensor& x);

// 2-D product. A 1-D left operand of length k is treated as a 1×k row and
// yields a 1-D result.
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise binary ops accept same-shape operands or a scalar on either side.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor neg(const Tensor& x);
Tensor relu(const Tensor& x);
// Gradient is zero outside [lo, hi].
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
// log(1 + e^x), evaluated without overflow.
Tensor softplus(const Tensor& x);

Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, std::size_t axis);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);

// Tiles a length-n row (shape {n} or {1,n}) into an m×n matrix.
Tensor repeat_rows(const Tensor& row, std::size_t m);
// Picks rows of a 2-D tensor; indices may repeat.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

}  // namespace analogy
