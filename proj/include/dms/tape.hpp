#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "dms/matrix.hpp"

namespace dms {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] std::size_t rows() const { return value().rows(); }
  [[nodiscard]] std::size_t cols() const { return value().cols(); }
  [[nodiscard]] Tape* tape() const noexcept { return tape_; }
  [[nodiscard]] std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records primitive operations in execution order for reverse-mode differentiation.
///
/// Execution order is a topological order, so backward() walks the nodes from
/// last to first. Gradients are accumulated additively into each input.
class Tape {
 public:
  /// Receives the node's output value and gradient plus one slot per input; a
  /// slot is null when that input does not need a gradient. Node storage is
  /// address-stable, so closures may hold references to input values.
  using Backward = std::function<void(const Matrix& out, const Matrix& out_grad,
                                      std::span<Matrix* const> in_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input (a parameter).
  Var leaf(Matrix value);
  /// Input treated as a constant; no gradient is tracked.
  Var constant(Matrix value);

  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);

  [[nodiscard]] const Matrix& value(Var v) const;
  /// Gradient of the last backward() loss w.r.t. `v`. Zero matrix when `v` was unreached.
  [[nodiscard]] const Matrix& grad(Var v) const;
  [[nodiscard]] bool needs_grad(Var v) const;

  /// Reverse sweep from a 1×1 loss; d(loss)/d(loss) = 1.
  void backward(Var loss);

  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    mutable Matrix grad;
    std::vector<std::size_t> inputs;
    Backward backward;
    bool needs_grad = false;
  };

  const Node& node(Var v) const;

  std::deque<Node> nodes_;
};

/// Differentiable primitives over Var.
namespace ad {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
/// Adds a 1×c row to every row of a.
Var add_row(Var a, Var bias);
Var relu(Var a);
Var softmax_rows(Var a);
/// Elementwise product with a constant matrix (dropout masks).
Var mask(Var a, const Matrix& m);
/// Multiplies row i of `a` by the constant scale(i, 0).
Var scale_rows(Var a, const Matrix& scale);
Var scale(Var a, double s);
/// Sum of all entries as a 1×1 value.
Var sum(Var a);
/// Mean over rows of −ln max(softmax(logits)[y], 1e-12).
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

}  // namespace ad

}  // namespace dms
