#pragma once

#include "dan/tensor.hpp"

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dan {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so insertion
/// order is a topological order and backward() is a single reverse sweep.
class Graph {
 public:
  /// Receives the node's forward value and its accumulated output gradient.
  using BackwardFn = std::function<void(Graph&, const Tensor& out, const Tensor& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad = true) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad, true, {}});
    return Var{this, nodes_.size() - 1};
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
  }

  /// Appends an operation result. The closure is dropped when no input
  /// participates in differentiation.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
    bool needs = false;
    for (const Var& v : inputs) {
      if (v.graph != this) throw std::logic_error("operand belongs to a different graph");
      needs = needs || nodes_[v.id].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs, false, needs ? std::move(fn) : BackwardFn{}});
    return Var{this, nodes_.size() - 1};
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool wants_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient accumulator for a node, allocated as zeros on first use.
  Tensor& grad_buffer(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.size() != n.value.size()) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
  }

  const Tensor& grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.size() != n.value.size()) {
      throw std::logic_error("no gradient recorded for node " + std::to_string(v.id));
    }
    return n.grad;
  }

  /// Populates gradients for every requires_grad node feeding `loss`.
  /// Leaves that do not reach the loss receive zero gradients.
  void backward(Var loss) {
    if (loss.graph != this) throw std::logic_error("loss belongs to a different graph");
    if (nodes_[loss.id].value.size() != 1) {
      throw DimensionError("backward() needs a scalar loss, got shape " +
                           shape_str(nodes_[loss.id].value.shape()));
    }
    for (Node& n : nodes_) n.grad = Tensor();
    if (nodes_[loss.id].requires_grad) {
      grad_buffer(loss)[0] = 1.0;
      for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.is_leaf || !n.requires_grad || n.grad.size() == 0) continue;
        n.backward(*this, n.value, n.grad);
      }
    }
    for (Node& n : nodes_) {
      if (n.is_leaf && n.requires_grad && n.grad.size() != n.value.size()) {
        n.grad = Tensor::zeros(n.value.shape());
      }
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool is_leaf = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph->value(id); }

}  // namespace dan
