// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vtcas/tensor.hpp"

namespace vtcas {

class Graph;
using NodeId = std::uint32_t;

/// A learnable tensor owned by a layer. Graphs bind to it by address for the
/// duration of one forward/backward pass and add into `grad`.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor init) : name(std::move(name)), value(std::move(init)), grad(value.shape()) {}

  std::string name;
  Tensor value;
  Tensor grad;
  bool requires_grad = true;

  std::size_t numel() const { return value.size(); }
  void zero_grad() {
    if (grad.shape() == value.shape()) {
      std::fill(grad.data().begin(), grad.data().end(), 0.0);
    } else {
      grad = Tensor(value.shape());
    }
  }
};

/// Handle to one recorded node of a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  NodeId id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

/// Gradients produced by one backward pass, indexed by node.
class GradMap {
 public:
  /// Total gradient of `v`; zeros when `v` was not reachable from the root.
  Tensor operator[](Var v) const;
  bool reached(Var v) const;

 private:
  friend class Graph;
  std::vector<std::vector<double>> grads_;
  std::vector<Shape> shapes_;
};

/// The differentiation record: an append-only trace of operations in creation
/// order. Backward walks it in exact reverse.
class Graph {
 public:
  /// Receives the node's upstream gradient; adds into parent buffers through
  /// Graph::grad_buffer.
  using BackwardFn = std::function<void(std::span<const double> grad_out, Graph& graph)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf whose gradient is tracked (gradient checks, probing inputs).
  Var input(Tensor value);
  /// Leaf with no gradient.
  Var constant(Tensor value);
  /// Leaf bound to a parameter. Repeated calls with the same parameter return
  /// the same node, so gradients from all uses accumulate.
  Var param(Parameter& p);

  /// Appends an operation node. `fn` is dropped when no parent needs a gradient.
  Var record(const char* op, Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(const char* op, Tensor value, std::span<const Var> parents, BackwardFn fn);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  const char* op_name(NodeId id) const { return nodes_[id].op; }
  std::size_t size() const { return nodes_.size(); }

  /// Runs reverse-mode differentiation from a scalar root, then adds the
  /// gradients of bound parameters into Parameter::grad.
  GradMap backward(Var root);

  /// Gradient accumulator for `id` during backward; empty if the node does not
  /// require a gradient.
  std::span<double> grad_buffer(NodeId id);

 private:
  struct Node {
    const char* op;
    Tensor value;
    BackwardFn backward;
    bool requires_grad;
  };

  Var push(const char* op, Tensor value, bool requires_grad, BackwardFn fn);

  std::deque<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::unordered_map<Parameter*, NodeId> bound_;
  bool backward_done_ = false;
};

}  // namespace vtcas
