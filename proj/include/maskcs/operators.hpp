#ifndef MASKCS_OPERATORS_HPP
#define MASKCS_OPERATORS_HPP

#include <concepts>
#include <utility>

#include "dct.hpp"
#include "errors.hpp"
#include "types.hpp"

namespace maskcs {

/// A real linear map with an exact adjoint. apply: cols -> rows.
template <class Op>
concept LinearOperator = requires(const Op& op, const Vector& in, Vector& out) {
  { op.rows() } -> std::convertible_to<Index>;
  { op.cols() } -> std::convertible_to<Index>;
  op.apply(in, out);
  op.adjoint(in, out);
};

/// Explicit matrix.
class DenseOperator {
 public:
  explicit DenseOperator(Matrix a) : a_(std::move(a)) {}

  Index rows() const noexcept { return a_.rows(); }
  Index cols() const noexcept { return a_.cols(); }
  void apply(const Vector& x, Vector& y) const { y.noalias() = a_ * x; }
  void adjoint(const Vector& y, Vector& x) const { x.noalias() = a_.transpose() * y; }
  const Matrix& matrix() const noexcept { return a_; }

 private:
  Matrix a_;
};

/// op o synthesize: acts on basis coefficients.
template <LinearOperator Op>
class SynthesisOperator {
 public:
  SynthesisOperator(const Op& op, SynthesisBasis basis) : op_(&op), basis_(std::move(basis)) {
    detail::require(basis_.kind() == SynthesisBasis::Kind::Canonical ||
                        basis_.shape().size() == op.cols(),
                    "synthesis basis shape does not match the operator");
  }

  Index rows() const { return op_->rows(); }
  Index cols() const { return op_->cols(); }
  void apply(const Vector& c, Vector& y) const { op_->apply(basis_.synthesize(c), y); }
  void adjoint(const Vector& y, Vector& c) const {
    Vector x;
    op_->adjoint(y, x);
    c = basis_.analyze(x);
  }

  /// (op S)(op S)^T w = op op^T w, since S is orthonormal.
  void apply_outer_gram(const Vector& w, Vector& out) const {
    Vector x;
    op_->adjoint(w, x);
    op_->apply(x, out);
  }

  bool precondition_outer_gram(const Vector& r, Vector& out) const {
    if constexpr (requires { op_->precondition_outer_gram(r, out); })
      return op_->precondition_outer_gram(r, out);
    else
      return false;
  }

  const Op& inner() const noexcept { return *op_; }
  const SynthesisBasis& basis() const noexcept { return basis_; }

 private:
  const Op* op_;
  SynthesisBasis basis_;
};

/// out = A A^T w, using a cheaper route when the operator provides one.
template <LinearOperator Op>
void apply_outer_gram(const Op& op, const Vector& w, Vector& out) {
  if constexpr (requires { op.apply_outer_gram(w, out); }) {
    op.apply_outer_gram(w, out);
  } else {
    Vector x;
    op.adjoint(w, x);
    op.apply(x, out);
  }
}

/// out = M^-1 r for an approximation M of A A^T, when the operator offers
/// one. Returns false when no preconditioner is available.
template <LinearOperator Op>
bool precondition_outer_gram(const Op& op, const Vector& r, Vector& out) {
  if constexpr (requires { op.precondition_outer_gram(r, out); })
    return op.precondition_outer_gram(r, out);
  else
    return false;
}

}  // namespace maskcs

#endif  // MASKCS_OPERATORS_HPP
