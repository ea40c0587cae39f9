#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "mssplace/core/errors.hpp"
#include "mssplace/core/types.hpp"

namespace mss {

template <class S>
class TapeT;

// Lightweight handle to one node of a tape. Copyable, only valid while the
// owning tape is alive.
template <class S>
class VarT {
 public:
  VarT() = default;
  VarT(TapeT<S>* tape, int id) : tape_(tape), id_(id) {}

  TapeT<S>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const MatX<S>& value() const { return tape_->value(id_); }
  const MatX<S>& grad() const { return tape_->grad(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  TapeT<S>* tape_ = nullptr;
  int id_ = -1;
};

// Record of one forward pass. Nodes are appended in evaluation order, so a
// reverse sweep over indices is a valid topological order for backprop.
// Gradients accumulate; build a fresh tape per forward pass and use
// ParameterStoreT::zero_grads between optimizer steps.
template <class S>
class TapeT {
 public:
  using BackwardFn = std::function<void(TapeT&, int self)>;

  struct Node {
    MatX<S> value;
    MatX<S> grad;  // allocated lazily, empty until touched
    bool needs_grad = false;
    BackwardFn backward;
  };

  explicit TapeT(bool check_finite = true) : check_finite_(check_finite) {}

  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  int size() const { return static_cast<int>(nodes_.size()); }

  VarT<S> emplace(MatX<S> value, bool needs_grad, BackwardFn backward = nullptr) {
    if (check_finite_ && !value.allFinite())
      throw NumericError("non-finite value produced in forward pass");
    nodes_.push_back(Node{std::move(value), MatX<S>(), needs_grad, std::move(backward)});
    return VarT<S>(this, size() - 1);
  }

  const MatX<S>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  const MatX<S>& grad(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) const_cast<Node&>(n).grad = MatX<S>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  // Accumulation target for op backward functions. Skips nodes that do not
  // require gradient so callers can accumulate unconditionally.
  void accumulate_grad(int id, const MatX<S>& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  // Reverse sweep from a scalar loss node. Interior node gradients are
  // consumed by the sweep; leaf gradients (inputs, parameters) accumulate, so
  // a second backward call adds one more unit of gradient rather than
  // compounding.
  void backward(int loss_id) {
    Node& loss = nodes_[static_cast<std::size_t>(loss_id)];
    if (loss.value.rows() != 1 || loss.value.cols() != 1)
      throw ShapeError("backward requires a scalar (1x1) loss node");
    // A loss with no differentiable ancestors (e.g. a constant) leaves every
    // gradient at zero.
    if (!loss.needs_grad) return;
    if (loss.grad.size() == 0)
      loss.grad = MatX<S>::Ones(1, 1);
    else
      loss.grad.array() += S(1);
    for (int i = loss_id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.needs_grad || n.grad.size() == 0 || !n.backward) continue;
      if (check_finite_ && !n.grad.allFinite())
        throw NumericError("non-finite gradient produced in backward pass");
      n.backward(*this, i);
      n.grad = MatX<S>();
    }
  }

  bool check_finite() const { return check_finite_; }

 private:
  std::vector<Node> nodes_;
  bool check_finite_;
};

using Tape = TapeT<Real>;
using Var = VarT<Real>;

}  // namespace mss
