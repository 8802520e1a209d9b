// SPDX-License-Identifier: Apache-2.0
#include "vtcas/graph.hpp"

#include "vtcas/error.hpp"

namespace vtcas {

const Tensor& Var::value() const { return graph_->value(id_); }
bool Var::requires_grad() const { return graph_->requires_grad(id_); }

Tensor GradMap::operator[](Var v) const {
  if (v.id() >= shapes_.size()) throw Error("GradMap: node not part of this record");
  const auto& g = grads_[v.id()];
  if (g.empty()) return Tensor(shapes_[v.id()]);
  return Tensor(shapes_[v.id()], g);
}

bool GradMap::reached(Var v) const { return v.id() < grads_.size() && !grads_[v.id()].empty(); }

Var Graph::push(const char* op, Tensor value, bool requires_grad, BackwardFn fn) {
  if (backward_done_) throw Error("Graph: cannot record after backward");
  if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(Node{op, std::move(value), requires_grad ? std::move(fn) : BackwardFn{}, requires_grad});
  return Var(this, id);
}

Var Graph::input(Tensor value) { return push("input", std::move(value), true, {}); }

Var Graph::constant(Tensor value) { return push("constant", std::move(value), false, {}); }

Var Graph::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Var v = push("param", p.value, p.requires_grad, {});
  bound_.emplace(&p, v.id());
  return v;
}

Var Graph::record(const char* op, Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Graph::record(const char* op, Tensor value, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  for (const Var& p : parents) {
    if (&p.graph() != this) throw Error(std::string(op) + ": operands belong to different records");
    needs = needs || p.requires_grad();
  }
  return push(op, std::move(value), needs, std::move(fn));
}

std::span<double> Graph::grad_buffer(NodeId id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return {};
  auto& g = grads_[id];
  if (g.empty()) g.assign(n.value.size(), 0.0);
  return g;
}

GradMap Graph::backward(Var root) {
  if (!root.valid()) throw Error("backward: root is not on a record");
  if (&root.graph() != this) throw Error("backward: root belongs to a different record");
  if (root.value().size() != 1) {
    throw ShapeError("backward: root must be scalar, got shape " + root.shape().str());
  }
  if (backward_done_) throw Error("backward: record already differentiated");
  backward_done_ = true;

  grads_.assign(nodes_.size(), {});
  if (nodes_[root.id()].requires_grad) grads_[root.id()] = {1.0};

  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || grads_[i].empty()) continue;
    // Parents have smaller ids; grads_ is presized so this reference is stable.
    const std::vector<double>& g = grads_[i];
    n.backward(std::span<const double>(g), *this);
  }

  for (auto& [param, id] : bound_) {
    const auto& g = grads_[id];
    if (g.empty()) continue;
    if (param->grad.shape() != param->value.shape()) param->zero_grad();
    auto dst = param->grad.data();
    for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
  }

  GradMap out;
  out.shapes_.reserve(nodes_.size());
  for (const Node& n : nodes_) out.shapes_.push_back(n.value.shape());
  out.grads_ = std::move(grads_);
  grads_.clear();
  return out;
}

}  // namespace vtcas
