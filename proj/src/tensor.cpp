#include "hhar/tensor.hpp"

#include <cmath>
#include <functional>
#include <unordered_set>
#include <utility>

namespace hhar {

namespace detail {

struct Node {
  Shape shape;
  Matrix value;  // storage_rows x storage_cols
  Matrix grad;   // empty until the reverse pass (or set_grad) touches it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};

Tensor wrap(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }

namespace {

std::shared_ptr<Node> make_leaf(Shape shape, Matrix storage, bool trainable) {
  if (storage.rows() != shape.storage_rows() ||
      storage.cols() != shape.storage_cols()) {
    throw std::invalid_argument("Tensor: storage " +
                                std::to_string(storage.rows()) + "x" +
                                std::to_string(storage.cols()) +
                                " does not match shape " + shape.str());
  }
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(storage);
  n->requires_grad = trainable;
  return n;
}

void ensure_grad(Node& n) {
  if (n.grad.size() == 0)
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
}

template <typename Expr>
void accumulate(Node& n, const Expr& g) {
  if (!n.requires_grad) return;
  ensure_grad(n);
  n.grad += g;
}

template <typename Expr>
void accumulate_rows(Node& n, Index start, Index count, const Expr& g) {
  if (!n.requires_grad) return;
  ensure_grad(n);
  n.grad.middleRows(start, count) += g;
}

bool any_requires_grad(const std::vector<Tensor>& inputs) {
  for (const auto& t : inputs)
    if (t.requires_grad()) return true;
  return false;
}

/// Builds the result node; parents and the backward rule are recorded only
/// when some input is differentiable.
Tensor make_result(Shape shape, Matrix storage, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  auto n = make_leaf(std::move(shape), std::move(storage), false);
  if (any_requires_grad(inputs)) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (auto& t : inputs) n->parents.push_back(t.node());
    n->backward = std::move(backward);
  }
  return wrap(std::move(n));
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a,
                              const Shape& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + a.str() +
                              " and " + b.str());
}

void require_rank(const std::string& op, const Tensor& t, int rank) {
  if (t.rank() != rank) {
    throw std::invalid_argument(op + ": expected rank-" + std::to_string(rank) +
                                " input, got shape " + t.shape().str());
  }
}

void require_defined(const std::string& op, const Tensor& t) {
  if (!t.defined()) throw std::invalid_argument(op + ": undefined tensor");
}

void require_same_shape(const std::string& op, const Tensor& a,
                        const Tensor& b) {
  require_defined(op, a);
  require_defined(op, b);
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

}  // namespace
}  // namespace detail

using detail::accumulate;
using detail::accumulate_rows;
using detail::make_result;
using detail::Node;
using detail::require_defined;
using detail::require_rank;
using detail::require_same_shape;
using detail::shape_error;

// ---- Tensor handle --------------------------------------------------------

Tensor Tensor::constant(Matrix values) {
  Shape s{values.rows(), values.cols()};
  return detail::wrap(detail::make_leaf(s, std::move(values), false));
}

Tensor Tensor::constant(const Shape& shape, Matrix storage) {
  return detail::wrap(detail::make_leaf(shape, std::move(storage), false));
}

Tensor Tensor::scalar(Real value) {
  return detail::wrap(
      detail::make_leaf(Shape{1}, Matrix::Constant(1, 1, value), false));
}

Tensor Tensor::variable(Matrix values) {
  Shape s{values.rows(), values.cols()};
  return detail::wrap(detail::make_leaf(s, std::move(values), true));
}

Tensor Tensor::variable(const Shape& shape, Matrix storage) {
  return detail::wrap(detail::make_leaf(shape, std::move(storage), true));
}

Tensor Tensor::zeros(const Shape& shape, bool trainable) {
  return detail::wrap(detail::make_leaf(
      shape, Matrix::Zero(shape.storage_rows(), shape.storage_cols()),
      trainable));
}

const Shape& Tensor::shape() const {
  require_defined("shape", *this);
  return node_->shape;
}

bool Tensor::requires_grad() const {
  return node_ != nullptr && node_->requires_grad;
}

const Matrix& Tensor::value() const {
  require_defined("value", *this);
  return node_->value;
}

Matrix& Tensor::value_mut() const {
  require_defined("value_mut", *this);
  return node_->value;
}

Real Tensor::item() const {
  require_defined("item", *this);
  if (size() != 1)
    throw std::invalid_argument("item: tensor has shape " + shape().str());
  return node_->value(0, 0);
}

Matrix Tensor::slice_value(Index i) const {
  require_rank("slice_value", *this, 3);
  const Index k = shape().dim(0), r = shape().dim(1);
  if (i < 0 || i >= k)
    throw std::invalid_argument("slice_value: index " + std::to_string(i) +
                                " out of range for shape " + shape().str());
  return node_->value.middleRows(i * r, r);
}

bool Tensor::has_grad() const {
  return node_ != nullptr && node_->grad.size() != 0;
}

const Matrix& Tensor::grad() const {
  require_defined("grad", *this);
  if (!has_grad())
    throw std::logic_error("grad: no gradient present for shape " +
                           shape().str());
  return node_->grad;
}

void Tensor::set_grad(Matrix grad) const {
  require_defined("set_grad", *this);
  if (grad.rows() != node_->value.rows() || grad.cols() != node_->value.cols())
    throw std::invalid_argument("set_grad: gradient storage mismatch for " +
                                shape().str());
  node_->grad = std::move(grad);
}

void Tensor::clear_grad() const {
  require_defined("clear_grad", *this);
  node_->grad.resize(0, 0);
}

const void* Tensor::node_id() const { return node_.get(); }

void Tensor::backward() const {
  require_defined("backward", *this);
  if (size() != 1)
    throw std::invalid_argument("backward: output has shape " + shape().str() +
                                ", expected a single element");
  if (!node_->requires_grad) return;  // nothing trainable upstream

  // Iterative post-order DFS: children precede parents in `order`.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad = Matrix::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

// ---- Operations -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined("matmul", a);
  require_defined("matmul", b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();

  if (sa.rank() == 2 && sb.rank() == 2) {
    if (sa.dim(1) != sb.dim(0)) shape_error("matmul", sa, sb);
    Matrix out = a.value() * b.value();
    return make_result(
        Shape{sa.dim(0), sb.dim(1)}, std::move(out), {a, b}, [](Node& n) {
          Node& na = *n.parents[0];
          Node& nb = *n.parents[1];
          accumulate(na, n.grad * nb.value.transpose());
          accumulate(nb, na.value.transpose() * n.grad);
        });
  }

  if (sa.rank() == 3 && sb.rank() == 2) {
    // Per-slice right product: out_i = a_i * b.
    if (sa.dim(2) != sb.dim(0)) shape_error("matmul", sa, sb);
    const Index k = sa.dim(0), r = sa.dim(1), c = sb.dim(1);
    Matrix out(k * r, c);
    for (Index i = 0; i < k; ++i)
      out.middleRows(i * r, r) = a.value().middleRows(i * r, r) * b.value();
    return make_result(
        Shape{k, r, c}, std::move(out), {a, b}, [k, r](Node& n) {
          Node& na = *n.parents[0];
          Node& nb = *n.parents[1];
          for (Index i = 0; i < k; ++i) {
            auto g = n.grad.middleRows(i * r, r);
            accumulate_rows(na, i * r, r, g * nb.value.transpose());
            accumulate(nb, na.value.middleRows(i * r, r).transpose() * g);
          }
        });
  }

  if (sa.rank() == 2 && sb.rank() == 3) {
    // Per-slice left product: out_i = a * b_i.
    if (sa.dim(1) != sb.dim(1)) shape_error("matmul", sa, sb);
    const Index k = sb.dim(0), r = sa.dim(0), m = sb.dim(1), c = sb.dim(2);
    Matrix out(k * r, c);
    for (Index i = 0; i < k; ++i)
      out.middleRows(i * r, r) = a.value() * b.value().middleRows(i * m, m);
    return make_result(
        Shape{k, r, c}, std::move(out), {a, b}, [k, r, m](Node& n) {
          Node& na = *n.parents[0];
          Node& nb = *n.parents[1];
          for (Index i = 0; i < k; ++i) {
            auto g = n.grad.middleRows(i * r, r);
            accumulate(na, g * nb.value.middleRows(i * m, m).transpose());
            accumulate_rows(nb, i * m, m, na.value.transpose() * g);
          }
        });
  }

  shape_error("matmul", sa, sb);
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  Matrix out = a.value().transpose();
  return make_result(Shape{a.shape().dim(1), a.shape().dim(0)}, std::move(out),
                     {a}, [](Node& n) {
                       accumulate(*n.parents[0], n.grad.transpose());
                     });
}

Tensor relu(const Tensor& a) {
  require_defined("relu", a);
  Matrix out = a.value().cwiseMax(0.0);
  return make_result(a.shape(), std::move(out), {a}, [](Node& n) {
    Node& na = *n.parents[0];
    accumulate(na, ((na.value.array() > 0.0).cast<Real>() * n.grad.array())
                       .matrix());
  });
}

Tensor sigmoid(const Tensor& a) {
  require_defined("sigmoid", a);
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return make_result(a.shape(), std::move(out), {a}, [](Node& n) {
    auto s = n.value.array();
    accumulate(*n.parents[0], (n.grad.array() * s * (1.0 - s)).matrix());
  });
}

Tensor row_softmax(const Tensor& a) {
  require_rank("row_softmax", a, 2);
  Matrix out = a.value();
  for (Index i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    row = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return make_result(a.shape(), std::move(out), {a}, [](Node& n) {
    Node& na = *n.parents[0];
    if (!na.requires_grad) return;
    Matrix dx(n.grad.rows(), n.grad.cols());
    for (Index i = 0; i < dx.rows(); ++i) {
      auto s = n.value.row(i).array();
      auto g = n.grad.row(i).array();
      const Real dot = (g * s).sum();
      dx.row(i) = (s * (g - dot)).matrix();
    }
    accumulate(na, dx);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Matrix out = a.value() + b.value();
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    accumulate(*n.parents[0], n.grad);
    accumulate(*n.parents[1], n.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Matrix out = a.value() - b.value();
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    accumulate(*n.parents[0], n.grad);
    accumulate(*n.parents[1], -n.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Matrix out = a.value().cwiseProduct(b.value());
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    Node& na = *n.parents[0];
    Node& nb = *n.parents[1];
    accumulate(na, n.grad.cwiseProduct(nb.value));
    accumulate(nb, n.grad.cwiseProduct(na.value));
  });
}

Tensor scale(const Tensor& a, Real c) {
  require_defined("scale", a);
  Matrix out = c * a.value();
  return make_result(a.shape(), std::move(out), {a}, [c](Node& n) {
    accumulate(*n.parents[0], c * n.grad);
  });
}

Tensor add_rows(const Tensor& a, const Tensor& row) {
  require_defined("add_rows", a);
  require_rank("add_rows", row, 1);
  if (row.shape().dim(0) != a.shape().storage_cols())
    shape_error("add_rows", a.shape(), row.shape());
  Matrix out = a.value().rowwise() + row.value().col(0).transpose();
  return make_result(a.shape(), std::move(out), {a, row}, [](Node& n) {
    accumulate(*n.parents[0], n.grad);
    accumulate(*n.parents[1], n.grad.colwise().sum().transpose());
  });
}

Tensor add_scalar(const Tensor& a, const Tensor& s) {
  require_defined("add_scalar", a);
  require_defined("add_scalar", s);
  if (s.size() != 1) shape_error("add_scalar", a.shape(), s.shape());
  Matrix out = (a.value().array() + s.item()).matrix();
  return make_result(a.shape(), std::move(out), {a, s}, [](Node& n) {
    accumulate(*n.parents[0], n.grad);
    accumulate(*n.parents[1], Matrix::Constant(1, 1, n.grad.sum()));
  });
}

Tensor sub_slices(const Tensor& a, const Tensor& b) {
  require_rank("sub_slices", a, 3);
  require_rank("sub_slices", b, 2);
  const Index k = a.shape().dim(0), r = a.shape().dim(1), c = a.shape().dim(2);
  if (b.shape().dim(0) != r || b.shape().dim(1) != c)
    shape_error("sub_slices", a.shape(), b.shape());
  Matrix out(k * r, c);
  for (Index i = 0; i < k; ++i)
    out.middleRows(i * r, r) = a.value().middleRows(i * r, r) - b.value();
  return make_result(a.shape(), std::move(out), {a, b}, [k, r](Node& n) {
    accumulate(*n.parents[0], n.grad);
    Node& nb = *n.parents[1];
    if (!nb.requires_grad) return;
    for (Index i = 0; i < k; ++i)
      accumulate(nb, -n.grad.middleRows(i * r, r));
  });
}

Tensor slice(const Tensor& a, Index i) {
  require_rank("slice", a, 3);
  const Index k = a.shape().dim(0), r = a.shape().dim(1), c = a.shape().dim(2);
  if (i < 0 || i >= k)
    throw std::invalid_argument("slice: index " + std::to_string(i) +
                                " out of range for shape " +
                                a.shape().str());
  Matrix out = a.value().middleRows(i * r, r);
  return make_result(Shape{r, c}, std::move(out), {a}, [i, r](Node& n) {
    accumulate_rows(*n.parents[0], i * r, r, n.grad);
  });
}

Tensor unflatten_rows(const Tensor& a, Index inner_rows, Index inner_cols) {
  require_rank("unflatten_rows", a, 2);
  const Index n_outer = a.shape().dim(0);
  if (inner_rows <= 0 || inner_cols <= 0 ||
      a.shape().dim(1) != inner_rows * inner_cols)
    shape_error("unflatten_rows", a.shape(), Shape{inner_rows, inner_cols});
  Matrix out =
      a.value().reshaped<Eigen::RowMajor>(n_outer * inner_rows, inner_cols);
  return make_result(Shape{n_outer, inner_rows, inner_cols}, std::move(out),
                     {a}, [n_outer, inner_rows, inner_cols](Node& n) {
                       accumulate(*n.parents[0],
                                  n.grad.reshaped<Eigen::RowMajor>(
                                      n_outer, inner_rows * inner_cols));
                     });
}

Tensor squeeze_last(const Tensor& a) {
  require_rank("squeeze_last", a, 3);
  const Index k = a.shape().dim(0), r = a.shape().dim(1);
  if (a.shape().dim(2) != 1)
    throw std::invalid_argument("squeeze_last: last extent must be 1, got " +
                                a.shape().str());
  Matrix out = a.value().reshaped<Eigen::RowMajor>(k, r);
  return make_result(Shape{k, r}, std::move(out), {a}, [k, r](Node& n) {
    accumulate(*n.parents[0], n.grad.reshaped<Eigen::RowMajor>(k * r, 1));
  });
}

Tensor log(const Tensor& a) {
  require_defined("log", a);
  if ((a.value().array() <= 0.0).any())
    throw std::invalid_argument("log: non-positive input entry");
  Matrix out = a.value().array().log().matrix();
  return make_result(a.shape(), std::move(out), {a}, [](Node& n) {
    Node& na = *n.parents[0];
    accumulate(na, n.grad.cwiseQuotient(na.value));
  });
}

Tensor clamp(const Tensor& a, Real lo, Real hi) {
  require_defined("clamp", a);
  if (!(lo <= hi))
    throw std::invalid_argument("clamp: empty interval [" +
                                std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return make_result(a.shape(), std::move(out), {a}, [lo, hi](Node& n) {
    Node& na = *n.parents[0];
    if (!na.requires_grad) return;
    auto inside =
        (na.value.array() > lo && na.value.array() < hi).cast<Real>();
    accumulate(na, (n.grad.array() * inside).matrix());
  });
}

Tensor sum(const Tensor& a) {
  require_defined("sum", a);
  Matrix out = Matrix::Constant(1, 1, a.value().sum());
  return make_result(Shape{1}, std::move(out), {a}, [](Node& n) {
    Node& na = *n.parents[0];
    accumulate(na, Matrix::Constant(na.value.rows(), na.value.cols(),
                                    n.grad(0, 0)));
  });
}

Tensor sum_squares(const Tensor& a) {
  require_defined("sum_squares", a);
  Matrix out = Matrix::Constant(1, 1, a.value().squaredNorm());
  return make_result(Shape{1}, std::move(out), {a}, [](Node& n) {
    accumulate(*n.parents[0], 2.0 * n.grad(0, 0) * n.parents[0]->value);
  });
}

Tensor add_n(const std::vector<Tensor>& terms) {
  if (terms.empty()) throw std::invalid_argument("add_n: no terms");
  for (const auto& t : terms) require_same_shape("add_n", terms.front(), t);
  Matrix out = terms.front().value();
  for (std::size_t i = 1; i < terms.size(); ++i) out += terms[i].value();
  return make_result(terms.front().shape(), std::move(out), terms,
                     [](Node& n) {
                       for (auto& p : n.parents) accumulate(*p, n.grad);
                     });
}

}  // namespace hhar
