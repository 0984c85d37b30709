#include "analogy/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace analogy {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace {

NodePtr make_node(Shape shape, std::vector<double> data, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

// Builds an op result. The backward closure and the parent links are kept
// only when some parent participates in differentiation.
Tensor make_result(Shape shape, std::vector<double> data,
                   std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward) {
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const NodePtr& p) { return p->requires_grad; });
  auto node = make_node(std::move(shape), std::move(data), needs);
  if (needs) {
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

// Gradient buffer of a parent, or nullptr when it does not take gradients.
double* grad_of(const NodePtr& p) {
  return p->requires_grad ? p->grad.data() : nullptr;
}

struct AxisLayout {
  std::size_t outer;
  std::size_t extent;
  std::size_t inner;
};

AxisLayout axis_layout(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
  }
  AxisLayout l{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

enum class Bcast { same, left_scalar, right_scalar };

Bcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Bcast::same;
  if (a.numel() == 1) return Bcast::left_scalar;
  if (b.numel() == 1) return Bcast::right_scalar;
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

void check_finite(std::span<const double> values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericDomainError(std::string(op) + ": non-finite result");
    }
  }
}

// Shared implementation of the four arithmetic binaries. `fwd` computes the
// value; `da`/`db` give the local partial derivatives at (x, y, out).
template <typename Fwd, typename Da, typename Db>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
              Da da, Db db) {
  const Bcast kind = broadcast_kind(a, b, name);
  const Shape shape = kind == Bcast::left_scalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  const auto av = a.data();
  const auto bv = b.data();
  auto ai = [kind](std::size_t i) { return kind == Bcast::left_scalar ? 0 : i; };
  auto bi = [kind](std::size_t i) { return kind == Bcast::right_scalar ? 0 : i; };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[ai(i)], bv[bi(i)]);
  return make_result(
      shape, std::move(out), {a.node(), b.node()},
      [da, db, ai, bi](Node& self) {
        const auto& pa = self.parents[0];
        const auto& pb = self.parents[1];
        double* ga = grad_of(pa);
        double* gb = grad_of(pb);
        for (std::size_t i = 0; i < self.data.size(); ++i) {
          const double x = pa->data[ai(i)];
          const double y = pb->data[bi(i)];
          const double g = self.grad[i];
          if (ga) ga[ai(i)] += g * da(x, y, self.data[i]);
          if (gb) gb[bi(i)] += g * db(x, y, self.data[i]);
        }
      });
}

// Unary elementwise op with derivative expressed in terms of (x, out).
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return make_result(x.shape(), std::move(out), {x.node()},
                     [deriv](Node& self) {
                       const auto& p = self.parents[0];
                       double* gp = grad_of(p);
                       if (!gp) return;
                       for (std::size_t i = 0; i < self.data.size(); ++i) {
                         gp[i] += self.grad[i] * deriv(p->data[i], self.data[i]);
                       }
                     });
}

}  // namespace

Tensor::Tensor() : node_(make_node({}, {0.0}, false)) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  node_ = make_node(std::move(shape), std::move(data), requires_grad);
  if (requires_grad) node_->grad.assign(node_->data.size(), 0.0);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({}, {value}, requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values, bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  return Tensor(std::move(node));
}

Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

std::size_t Tensor::dim(std::size_t i) const {
  if (i >= rank()) {
    throw DimensionError("dimension index " + std::to_string(i) +
                         " out of range for shape " + shape_str(shape()));
  }
  return node_->shape[i];
}

std::span<double> Tensor::mutable_data() {
  if (!node_->is_leaf()) throw ContractError("mutable_data on a non-leaf tensor");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on non-scalar tensor " + shape_str(shape()));
  }
  return node_->data[0];
}

std::span<double> Tensor::mutable_grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_->requires_grad) node_->grad.assign(node_->data.size(), 0.0);
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " +
                        shape_str(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; parents are visited in insertion order so the
  // resulting order is deterministic.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) {
      n->grad.assign(n->data.size(), 0.0);
    } else if (n->grad.empty()) {
      n->grad.assign(n->data.size(), 0.0);
    }
  }
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
  // Interior buffers are not needed once propagated.
  for (Node* n : order) {
    if (!n->is_leaf() && n != node_.get()) n->grad.clear();
  }
}

Tensor detach(const Tensor& x) {
  return Tensor(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const bool row_vector = a.rank() == 1;
  if (!(a.rank() == 2 || row_vector) || b.rank() != 2) {
    throw DimensionError("matmul: expected matrices, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  }
  const std::size_t m = row_vector ? 1 : a.dim(0);
  const std::size_t k = row_vector ? a.dim(0) : a.dim(1);
  const std::size_t n = b.dim(1);
  if (k != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions differ for " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  Shape shape = row_vector ? Shape{n} : Shape{m, n};
  return make_result(std::move(shape), std::move(out), {a.node(), b.node()},
                     [m, k, n](Node& self) {
                       const auto& pa = self.parents[0];
                       const auto& pb = self.parents[1];
                       const double* g = self.grad.data();
                       if (double* ga = grad_of(pa)) {
                         // ga += g · bᵀ
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t p = 0; p < k; ++p) {
                             const double* brow = &pb->data[p * n];
                             const double* grow = &g[i * n];
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                             ga[i * k + p] += acc;
                           }
                         }
                       }
                       if (double* gb = grad_of(pb)) {
                         // gb += aᵀ · g
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t p = 0; p < k; ++p) {
                             const double aip = pa->data[i * k + p];
                             if (aip == 0.0) continue;
                             const double* grow = &g[i * n];
                             double* gbrow = &gb[p * n];
                             for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                           }
                         }
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.data()) {
    if (v == 0.0) throw NumericDomainError("div: division by zero");
  }
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: empty interval");
  return unary(
      x, [lo, hi](double v) { return v < lo ? lo : v > hi ? hi : v; },
      [lo, hi](double v, double) { return v < lo || v > hi ? 0.0 : 1.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) {
      throw NumericDomainError("log: input must be strictly positive, got " +
                               std::to_string(v));
    }
  }
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor exp(const Tensor& x) {
  Tensor out = unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
  check_finite(out.data(), "exp");
  return out;
}

Tensor softplus(const Tensor& x) {
  return unary(
      x,
      [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v, double) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisLayout l = axis_layout(x.shape(), axis, "softmax");
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t j = 0; j < l.inner; ++j) {
      auto idx = [&](std::size_t i) { return (o * l.extent + i) * l.inner + j; };
      double mx = xv[idx(0)];
      for (std::size_t i = 1; i < l.extent; ++i) mx = std::max(mx, xv[idx(i)]);
      double total = 0.0;
      for (std::size_t i = 0; i < l.extent; ++i) {
        out[idx(i)] = std::exp(xv[idx(i)] - mx);
        total += out[idx(i)];
      }
      for (std::size_t i = 0; i < l.extent; ++i) out[idx(i)] /= total;
    }
  }
  return make_result(x.shape(), std::move(out), {x.node()}, [l](Node& self) {
    double* gp = grad_of(self.parents[0]);
    if (!gp) return;
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t j = 0; j < l.inner; ++j) {
        auto idx = [&](std::size_t i) { return (o * l.extent + i) * l.inner + j; };
        double dot = 0.0;
        for (std::size_t i = 0; i < l.extent; ++i) dot += self.grad[idx(i)] * self.data[idx(i)];
        for (std::size_t i = 0; i < l.extent; ++i) {
          gp[idx(i)] += self.data[idx(i)] * (self.grad[idx(i)] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const AxisLayout l = axis_layout(x.shape(), axis, "log_softmax");
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t j = 0; j < l.inner; ++j) {
      auto idx = [&](std::size_t i) { return (o * l.extent + i) * l.inner + j; };
      double mx = xv[idx(0)];
      for (std::size_t i = 1; i < l.extent; ++i) mx = std::max(mx, xv[idx(i)]);
      double total = 0.0;
      for (std::size_t i = 0; i < l.extent; ++i) total += std::exp(xv[idx(i)] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t i = 0; i < l.extent; ++i) out[idx(i)] = xv[idx(i)] - lse;
    }
  }
  return make_result(x.shape(), std::move(out), {x.node()}, [l](Node& self) {
    double* gp = grad_of(self.parents[0]);
    if (!gp) return;
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t j = 0; j < l.inner; ++j) {
        auto idx = [&](std::size_t i) { return (o * l.extent + i) * l.inner + j; };
        double gsum = 0.0;
        for (std::size_t i = 0; i < l.extent; ++i) gsum += self.grad[idx(i)];
        for (std::size_t i = 0; i < l.extent; ++i) {
          gp[idx(i)] += self.grad[idx(i)] - std::exp(self.data[idx(i)]) * gsum;
        }
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  const auto xv = x.data();
  double total = 0.0;
  for (double v : xv) total += v;
  return make_result({}, {total}, {x.node()}, [](Node& self) {
    double* gp = grad_of(self.parents[0]);
    if (!gp) return;
    const double g = self.grad[0];
    const std::size_t n = self.parents[0]->data.size();
    for (std::size_t i = 0; i < n; ++i) gp[i] += g;
  });
}

Tensor sum(const Tensor& x, std::size_t axis) {
  const AxisLayout l = axis_layout(x.shape(), axis, "sum");
  const auto xv = x.data();
  std::vector<double> out(l.outer * l.inner, 0.0);
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.extent; ++i) {
      for (std::size_t j = 0; j < l.inner; ++j) {
        out[o * l.inner + j] += xv[(o * l.extent + i) * l.inner + j];
      }
    }
  }
  return make_result(drop_axis(x.shape(), axis), std::move(out), {x.node()},
                     [l](Node& self) {
                       double* gp = grad_of(self.parents[0]);
                       if (!gp) return;
                       for (std::size_t o = 0; o < l.outer; ++o) {
                         for (std::size_t i = 0; i < l.extent; ++i) {
                           for (std::size_t j = 0; j < l.inner; ++j) {
                             gp[(o * l.extent + i) * l.inner + j] += self.grad[o * l.inner + j];
                           }
                         }
                       }
                     });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mean(const Tensor& x, std::size_t axis) {
  const AxisLayout l = axis_layout(x.shape(), axis, "mean");
  return scale(sum(x, axis), 1.0 / static_cast<double>(l.extent));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("reshape: zero dimension in " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x.node()}, [](Node& self) {
    double* gp = grad_of(self.parents[0]);
    if (!gp) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gp[i] += self.grad[i];
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& t : parts) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw DimensionError("concat: shape " + shape_str(s) + " incompatible with " +
                           shape_str(first) + " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  const AxisLayout lo = axis_layout(out_shape, axis, "concat");
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::vector<NodePtr> parents;
  std::size_t offset = 0;
  for (const Tensor& t : parts) {
    const std::size_t ext = t.shape()[axis];
    const auto tv = t.data();
    for (std::size_t o = 0; o < lo.outer; ++o) {
      for (std::size_t i = 0; i < ext; ++i) {
        for (std::size_t j = 0; j < lo.inner; ++j) {
          out[(o * lo.extent + offset + i) * lo.inner + j] = tv[(o * ext + i) * lo.inner + j];
        }
      }
    }
    offsets.push_back(offset);
    parents.push_back(t.node());
    offset += ext;
  }
  return make_result(std::move(out_shape), std::move(out), std::move(parents),
                     [lo, offsets, axis](Node& self) {
                       for (std::size_t p = 0; p < self.parents.size(); ++p) {
                         const auto& parent = self.parents[p];
                         double* gp = grad_of(parent);
                         if (!gp) continue;
                         const std::size_t ext = parent->shape[axis];
                         for (std::size_t o = 0; o < lo.outer; ++o) {
                           for (std::size_t i = 0; i < ext; ++i) {
                             for (std::size_t j = 0; j < lo.inner; ++j) {
                               gp[(o * ext + i) * lo.inner + j] +=
                                   self.grad[(o * lo.extent + offsets[p] + i) * lo.inner + j];
                             }
                           }
                         }
                       }
                     });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor repeat_rows(const Tensor& row, std::size_t m) {
  const bool ok = row.rank() == 1 || (row.rank() == 2 && row.dim(0) == 1);
  if (!ok || m == 0) {
    throw DimensionError("repeat_rows: expected a row vector, got " + shape_str(row.shape()));
  }
  const std::size_t n = row.numel();
  std::vector<double> out(m * n);
  const auto rv = row.data();
  for (std::size_t i = 0; i < m; ++i) std::copy(rv.begin(), rv.end(), out.begin() + i * n);
  return make_result({m, n}, std::move(out), {row.node()}, [m, n](Node& self) {
    double* gp = grad_of(self.parents[0]);
    if (!gp) return;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) gp[j] += self.grad[i * n + j];
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  if (x.rank() != 2) {
    throw DimensionError("gather_rows: expected a matrix, got " + shape_str(x.shape()));
  }
  if (indices.empty()) throw DimensionError("gather_rows: empty index list");
  const std::size_t rows = x.dim(0);
  const std::size_t n = x.dim(1);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<double> out(idx.size() * n);
  const auto xv = x.data();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= rows) {
      throw DimensionError("gather_rows: row " + std::to_string(idx[r]) +
                           " out of range for shape " + shape_str(x.shape()));
    }
    std::copy_n(xv.begin() + idx[r] * n, n, out.begin() + r * n);
  }
  return make_result({idx.size(), n}, std::move(out), {x.node()},
                     [idx, n](Node& self) {
                       double* gp = grad_of(self.parents[0]);
                       if (!gp) return;
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         for (std::size_t j = 0; j < n; ++j) gp[idx[r] * n + j] += self.grad[r * n + j];
                       }
                     });
}

}  // namespace analogy
