#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "concertcut/core/error.hpp"

namespace concertcut {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  std::span<double> grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) {
    detail::grad_mode_flag() = false;
  }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

// Dense float64 tensor with shared-handle semantics. Copies alias the same
// storage; operations produce new tensors and record a backward closure when
// any input requires a gradient.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (shape_numel(shape) != data.size()) {
      throw DimensionError("tensor data size " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    }
    for (auto d : shape) {
      if (d == 0) throw DimensionError("tensor dims must be positive");
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }
  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value),
                  requires_grad);
  }
  static Tensor ones(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), 1.0, requires_grad);
  }
  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor({1}, {v}, requires_grad);
  }
  static Tensor vector(std::vector<double> v, bool requires_grad = false) {
    const auto n = v.size();
    return Tensor({n}, std::move(v), requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  // Writable view for leaves (parameters, inputs). Mutating a tensor that is
  // already part of a recorded graph invalidates that graph.
  std::span<double> mutable_data() { return node_->data; }

  bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  const char* op() const { return node_->op; }

  double item() const {
    if (numel() != 1) {
      throw ContractError("item() on tensor of shape " + shape_str(shape()));
    }
    return node_->data[0];
  }

  double at(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != rank()) throw DimensionError("index rank mismatch");
    std::size_t flat = 0;
    std::size_t i = 0;
    for (auto v : idx) {
      if (v >= node_->shape[i]) throw DimensionError("index out of range");
      flat = flat * node_->shape[i] + v;
      ++i;
    }
    return node_->data[flat];
  }

  bool all_finite() const {
    return std::all_of(node_->data.begin(), node_->data.end(),
                       [](double v) { return std::isfinite(v); });
  }

  // Fresh leaf holding a copy of the values.
  Tensor detach() const { return Tensor(shape(), node_->data, false); }

  // Reverse-mode sweep from a scalar. Gradients accumulate into every
  // reachable tensor that requires one, as repeated calls add up.
  void backward() const {
    if (numel() != 1) {
      throw ContractError("backward() requires a scalar, got shape " +
                          shape_str(shape()));
    }
    if (!node_->requires_grad) {
      throw ContractError("backward() on a tensor that does not require grad");
    }
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        detail::Node* p = n->parents[next++].get();
        if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    node_->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      detail::Node* n = *it;
      if (n->backward && n->grad.size() == n->data.size()) n->backward(*n);
    }
    // Interior buffers are released so repeated sweeps over shared leaves
    // only accumulate on leaves.
    for (detail::Node* n : order) {
      if (n->backward) n->grad.clear();
    }
  }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

// Wraps computed values into an op output and, when needed, attaches the
// backward closure. `fn` receives the output node; it must only touch grads
// of parents that require them.
template <class Fn>
Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   std::initializer_list<const Tensor*> inputs, Fn&& fn) {
  Tensor out(std::move(shape), std::move(data), false);
  if (any_requires_grad(inputs)) {
    auto& n = *out.node();
    n.requires_grad = true;
    n.op = op;
    for (const Tensor* t : inputs) {
      if (t && t->defined()) n.parents.push_back(t->node());
    }
    n.backward = std::forward<Fn>(fn);
  } else {
    out.node()->op = op;
  }
  return out;
}

inline std::span<double> grad_of(const Tensor& t) {
  return t.node()->grad_buffer();
}

inline bool wants(const Tensor& t) { return t.defined() && t.requires_grad(); }

}  // namespace detail
}  // namespace concertcut
