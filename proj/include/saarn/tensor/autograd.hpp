#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// tensors. A Var is a shared handle to a graph node; ops create new nodes and
// record a backward closure only when at least one input requires a gradient.

#include <algorithm>
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

#include "saarn/errors.hpp"

namespace saarn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ')';
  return os.str();
}

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<T>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <class T>
class Var {
 public:
  Var() = default;

  static Var constant(Shape shape, std::vector<T> value) {
    return Var(std::move(shape), std::move(value), false);
  }
  static Var constant(Shape shape, T fill = T(0)) {
    const auto n = numel(shape);
    return Var(std::move(shape), std::vector<T>(n, fill), false);
  }
  static Var parameter(Shape shape, std::vector<T> value) {
    return Var(std::move(shape), std::move(value), true);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  std::span<const T> value() const { return node_->value; }
  std::span<T> mutable_value() { return node_->value; }
  const T* data() const { return node_->value.data(); }

  // Empty span when no gradient has been accumulated yet.
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), T(0)); }

  T item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
    return node_->value[0];
  }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& handle() const { return node_; }

  // Builds an op result; records the backward closure only if some parent
  // participates in differentiation.
  static Var make(Shape shape, std::vector<T> value,
                  std::vector<Var> parents,
                  std::function<void(Node<T>&)> backward) {
    Var out(std::move(shape), std::move(value), false);
    const bool needs = std::any_of(parents.begin(), parents.end(),
                                   [](const Var& p) { return p.requires_grad(); });
    if (needs) {
      out.node_->requires_grad = true;
      out.node_->parents.reserve(parents.size());
      for (auto& p : parents) out.node_->parents.push_back(p.node_);
      out.node_->backward = std::move(backward);
    }
    return out;
  }

 private:
  Var(Shape shape, std::vector<T> value, bool requires_grad)
      : node_(std::make_shared<Node<T>>()) {
    if (numel(shape) != value.size()) {
      throw ShapeError("value size " + std::to_string(value.size()) +
                       " does not match shape " + to_string(shape));
    }
    node_->shape = std::move(shape);
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  std::shared_ptr<Node<T>> node_;
};

// Accumulates d(root)/d(node) into every reachable node that requires a
// gradient. root must hold a single element.
template <class T>
void backward(const Var<T>& root) {
  if (root.size() != 1) throw ShapeError("backward() needs a scalar root");
  if (!root.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

}  // namespace saarn
