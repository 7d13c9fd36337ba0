#pragma once

#include "hhar/types.hpp"

#include <memory>
#include <vector>

namespace hhar {

class Tensor;

namespace detail {
struct Node;
Tensor wrap(std::shared_ptr<Node> node);
}  // namespace detail

/// Differentiable dense tensor of 64-bit reals, rank 1 to 3.
///
/// A Tensor is a cheap handle to a graph node holding a value and, for
/// trainable or intermediate nodes, a gradient of the same shape. Free
/// functions below build new nodes and record the exact reverse-mode rule, so
/// calling backward() on a scalar result fills the grad of every upstream
/// node that requires one. Rank-3 support is limited to the per-slice and
/// elementwise operations listed here; there is no general broadcasting.
class Tensor {
 public:
  Tensor() = default;

  /// Non-trainable leaf. Rank follows the matrix (r x c).
  static Tensor constant(Matrix values);
  /// Non-trainable leaf with explicit shape; storage per Shape's convention.
  static Tensor constant(const Shape& shape, Matrix storage);
  /// Single-element non-trainable leaf, shape {1}.
  static Tensor scalar(Real value);
  /// Trainable leaf (rank-2).
  static Tensor variable(Matrix values);
  static Tensor variable(const Shape& shape, Matrix storage);
  static Tensor zeros(const Shape& shape, bool trainable = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return shape().rank(); }
  Index size() const { return shape().size(); }
  bool requires_grad() const;

  const Matrix& value() const;
  /// Mutable access to the stored values. A Tensor is a handle; mutation
  /// through any copy of it is visible to all copies.
  Matrix& value_mut() const;
  /// Value of a single-element tensor.
  Real item() const;
  /// Copy of slice i of a rank-3 tensor, as an r x c matrix.
  Matrix slice_value(Index i) const;

  bool has_grad() const;
  const Matrix& grad() const;
  void set_grad(Matrix grad) const;
  void clear_grad() const;

  /// Reverse pass seeded from this tensor, which must be single-element.
  /// Accumulates into the grad of every reachable node that requires one.
  void backward() const;

  /// Identity of the underlying node; stable for the node's lifetime.
  const void* node_id() const;

  /// Internal: the underlying node handle. Used by the op implementations.
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor detail::wrap(std::shared_ptr<detail::Node> node);
};

// ---- Operations ----------------------------------------------------------
// Every function validates shapes and throws std::invalid_argument naming
// the offending extents.

/// Matrix product. Supported rank pairs: (2,2); (3,2) applies b on the right
/// of every slice of a; (2,3) applies a on the left of every slice of b.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Rank-2 transpose.
Tensor transpose(const Tensor& a);

/// Elementwise max(0, x), any rank.
Tensor relu(const Tensor& a);

/// Elementwise logistic function, any rank.
Tensor sigmoid(const Tensor& a);

/// Per-row exp-normalization of a rank-2 tensor; rows sum to one. The
/// backward pass applies the full per-row softmax Jacobian.
Tensor row_softmax(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise (Hadamard) product, same shape.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real c);

/// Adds a rank-1 row of length storage_cols(a) to every storage row of a.
/// This is the bias broadcast for rank-2 and rank-3 operands.
Tensor add_rows(const Tensor& a, const Tensor& row);

/// Adds a single-element tensor to every entry of a.
Tensor add_scalar(const Tensor& a, const Tensor& s);

/// Subtracts a rank-2 tensor from every slice of a rank-3 tensor.
Tensor sub_slices(const Tensor& a, const Tensor& b);

/// Slice i of a rank-3 tensor as a rank-2 tensor.
Tensor slice(const Tensor& a, Index i);

/// Reinterprets a rank-2 (n, inner_rows*inner_cols) tensor as rank-3
/// (n, inner_rows, inner_cols); row i is read row-major into slice i.
Tensor unflatten_rows(const Tensor& a, Index inner_rows, Index inner_cols);

/// Drops the unit last extent of a rank-3 (k, r, 1) tensor, giving (k, r).
Tensor squeeze_last(const Tensor& a);

/// Elementwise natural log; input entries must be positive.
Tensor log(const Tensor& a);

/// Elementwise clamp into [lo, hi]; gradient is zero where the bound binds.
Tensor clamp(const Tensor& a, Real lo, Real hi);

/// Sum of all entries, shape {1}.
Tensor sum(const Tensor& a);

/// Sum of squared entries (squared Frobenius norm), shape {1}.
Tensor sum_squares(const Tensor& a);

/// Sum of same-shaped tensors in one node; avoids deep add chains.
Tensor add_n(const std::vector<Tensor>& terms);

}  // namespace hhar
