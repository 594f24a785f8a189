#ifndef MASKCS_SOLVERS_HPP
#define MASKCS_SOLVERS_HPP

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "dct.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "operators.hpp"
#include "types.hpp"

namespace maskcs {

enum class SolverVariant { LeastSquares, BasisPursuit };

/// How basis pursuit enforces Ax = y in its x-update.
enum class Projection {
  Auto,       ///< dense factorization for small operators, inner CG otherwise
  InnerCg,    ///< matrix-free CG on A A^T, warm-started
  DenseQr,    ///< complete orthogonal decomposition of the probed matrix
};

struct SolverConfig {
  SolverVariant variant = SolverVariant::BasisPursuit;
  Index max_iters = 0;        ///< 0: 5000 for basis pursuit, 2 L for least squares
  double tol = 1e-6;
  double admm_penalty = 1.0;  ///< initial ADMM penalty, on the normalized problem
  Projection projection = Projection::Auto;
  Index inner_max_iters = 0;  ///< 0: rows of the operator
  Index dense_projection_cap = Index{1} << 21;
  /// Called after every outer iteration with (iteration, primal residual, dual residual).
  std::function<void(Index, double, double)> on_iteration;

  void validate() const {
    detail::require(tol > 0.0, "solver tol must be positive");
    detail::require(max_iters >= 0, "solver max_iters must be >= 0 (0 selects the default)");
    detail::require(admm_penalty > 0.0, "admm_penalty must be positive");
  }
};

struct RecoveryResult {
  Vector estimate;       ///< signal (synthesized when a basis is used)
  Vector coefficients;   ///< unknowns in the solver's basis
  double rel_error = std::numeric_limits<double>::quiet_NaN();  ///< set when ground truth is known
  Index iterations = 0;
  Index inner_iterations = 0;
  double final_residual = 0.0;   ///< LS: ||A^T(Ax-y)||/||A^T y||; BP: consensus residual ||x-z||/max(||x||,||z||)
  double dual_residual = 0.0;    ///< BP only
  double feasibility_gap = 0.0;  ///< ||Ax - y|| / ||y||
  double l1_value = 0.0;
  bool converged = false;

  KeyValueRecord to_record() const {
    KeyValueRecord r;
    r.add("rel_error", rel_error).add("iterations", iterations);
    r.add("inner_iterations", inner_iterations).add("final_residual", final_residual);
    r.add("dual_residual", dual_residual).add("feasibility_gap", feasibility_gap);
    r.add("l1_value", l1_value).add("converged", converged);
    return r;
  }
};

/// ||x_hat - x_star|| / ||x_star||.
inline double relative_error(const Vector& x_hat, const Vector& x_star) {
  detail::require(x_hat.size() == x_star.size(), "relative_error: length mismatch");
  const double den = x_star.norm();
  if (!(den > 0.0)) throw std::domain_error("relative_error: ground truth has zero norm");
  return (x_hat - x_star).norm() / den;
}

// ---------------------------------------------------------------------------
// Least squares

/// argmin ||Ax - y||^2 by CG on the normal equations (CGLS form). Stops when
/// ||A^T(Ax - y)|| <= tol ||A^T y||; the final residual is recomputed from
/// scratch, and a drifted recurrence triggers a restart.
template <LinearOperator Op>
RecoveryResult least_squares(const Op& A, const Vector& y, SolverConfig cfg = {}) {
  cfg.variant = SolverVariant::LeastSquares;
  cfg.validate();
  detail::require(y.size() == A.rows(), "least_squares: measurement length mismatch");
  detail::require(y.allFinite(), "least_squares: non-finite measurements");
  const Index n = A.cols();
  const Index max_iters = cfg.max_iters > 0 ? cfg.max_iters : 2 * n;

  RecoveryResult res;
  Vector x = Vector::Zero(n);
  Vector r = y, s, p, q;
  A.adjoint(r, s);
  const double aty = s.norm();
  if (aty == 0.0) {
    res.estimate = res.coefficients = x;
    res.converged = true;
    res.feasibility_gap = y.norm() > 0.0 ? 1.0 : 0.0;
    return res;
  }
  p = s;
  double gamma = s.squaredNorm();
  for (Index it = 1; it <= max_iters; ++it) {
    A.apply(p, q);
    const double curvature = q.squaredNorm();
    if (!(curvature > 0.0))
      throw convergence_error("least_squares: zero-curvature search direction at iteration " +
                              std::to_string(it));
    const double alpha = gamma / curvature;
    x += alpha * p;
    r -= alpha * q;
    A.adjoint(r, s);
    double gamma_new = s.squaredNorm();
    res.iterations = it;
    if (std::sqrt(gamma_new) <= cfg.tol * aty) {
      // Recompute from scratch before accepting.
      Vector ax;
      A.apply(x, ax);
      r = y - ax;
      A.adjoint(r, s);
      gamma_new = s.squaredNorm();
      if (std::sqrt(gamma_new) <= cfg.tol * aty) {
        res.converged = true;
        gamma = gamma_new;
        break;
      }
      p = s;
      gamma = gamma_new;
      continue;
    }
    p = s + (gamma_new / gamma) * p;
    gamma = gamma_new;
  }
  // Independent check: one more apply/adjoint pass.
  Vector ax, g;
  A.apply(x, ax);
  A.adjoint(ax - y, g);
  res.final_residual = g.norm() / aty;
  res.converged = res.converged && res.final_residual <= cfg.tol * (1.0 + 1e-8);
  const double yn = y.norm();
  res.feasibility_gap = yn > 0.0 ? (ax - y).norm() / yn : 0.0;
  res.l1_value = x.lpNorm<1>();
  res.estimate = x;
  res.coefficients = x;
  return res;
}

// ---------------------------------------------------------------------------
// Projections onto {x : Ax = b}

/// x = v - A^T w with A A^T w = A v - b solved by CG, warm-started from the
/// previous w. The inner relative tolerance applies to ||b||.
template <LinearOperator Op>
class CgProjector {
 public:
  CgProjector(const Op& A, const Vector& b, double tol, Index max_iters)
      : A_(&A), b_(&b), tol_(tol), max_iters_(max_iters), w_(Vector::Zero(A.rows())) {}

  Vector project(const Vector& v) {
    Vector av;
    A_->apply(v, av);
    const Vector rhs = av - *b_;
    solve(rhs);
    Vector atw;
    A_->adjoint(w_, atw);
    return v - atw;
  }

  Index iterations() const noexcept { return total_iters_; }

 private:
  // Preconditioned CG on A A^T w = rhs from the current w.
  void solve(const Vector& rhs) {
    const double target = tol_ * b_->norm();
    Vector r, q, zr;
    apply_outer_gram(*A_, w_, q);
    r = rhs - q;
    if (r.norm() <= target) return;
    auto precond = [&](const Vector& in, Vector& out) {
      if (!precondition_outer_gram(*A_, in, out)) out = in;
    };
    precond(r, zr);
    double rz = r.dot(zr);
    Vector p = zr;
    for (Index it = 0; it < max_iters_; ++it) {
      apply_outer_gram(*A_, p, q);
      const double pq = p.dot(q);
      if (!(pq > 0.0)) break;
      const double alpha = rz / pq;
      w_ += alpha * p;
      r -= alpha * q;
      ++total_iters_;
      if (r.norm() <= target) return;
      precond(r, zr);
      const double rz_new = r.dot(zr);
      p = zr + (rz_new / rz) * p;
      rz = rz_new;
    }
  }

  const Op* A_;
  const Vector* b_;
  double tol_;
  Index max_iters_;
  Vector w_;
  Index total_iters_ = 0;
};

/// Probes an operator column by column into a dense matrix.
template <LinearOperator Op>
Matrix probe_dense(const Op& A) {
  Matrix M(A.rows(), A.cols());
  Vector e = Vector::Zero(A.cols()), col;
  for (Index j = 0; j < A.cols(); ++j) {
    e[j] = 1.0;
    A.apply(e, col);
    M.col(j) = col;
    e[j] = 0.0;
  }
  return M;
}

/// x = v - A^+ (A v - b), via a complete orthogonal decomposition.
class DenseProjector {
 public:
  DenseProjector(Matrix A, const Vector& b) : A_(std::move(A)), b_(&b), cod_(A_) {}

  Vector project(const Vector& v) const {
    const Vector rhs = A_ * v - *b_;
    return v - cod_.solve(rhs);
  }
  Index iterations() const noexcept { return 0; }

 private:
  Matrix A_;
  const Vector* b_;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod_;
};

// ---------------------------------------------------------------------------
// Basis pursuit

namespace detail {

inline void soft_threshold(const Vector& v, double t, Vector& out) {
  out = v.array().sign() * (v.array().abs() - t).max(0.0);
}

// ADMM for min ||x||_1 s.t. Ax = b in consensus form:
//   x <- P(z - u),  z <- soft(x + u, 1/rho),  u <- u + x - z
// with residual balancing (rho x2 or /2 when one residual exceeds the other
// tenfold; the scaled dual u is rescaled accordingly). b is pre-normalized so
// that the least-norm solution has unit RMS, which makes rho = 1 meaningful
// independent of signal scale.
template <LinearOperator Op, class Projector>
RecoveryResult admm_basis_pursuit(const Op& A, const Vector& b_raw, const SolverConfig& cfg,
                                  Projector&& make_projector) {
  const Index n = A.cols();
  const Index max_iters = cfg.max_iters > 0 ? cfg.max_iters : 5000;
  RecoveryResult res;
  const double bnorm = b_raw.norm();
  if (bnorm == 0.0) {
    res.estimate = res.coefficients = Vector::Zero(n);
    res.converged = true;
    return res;
  }

  Vector b = b_raw;
  auto proj = make_projector(b);
  Vector x = proj.project(Vector::Zero(n));
  const double scale = x.norm() / std::sqrt(static_cast<double>(n));
  if (!(scale > 0.0)) throw convergence_error("basis_pursuit: projection returned zero");
  b /= scale;
  x /= scale;

  Vector z, u = Vector::Zero(n), z_old;
  soft_threshold(x, 1.0 / cfg.admm_penalty, z);
  u = x - z;
  double rho = cfg.admm_penalty;
  // Penalty changes are spaced out and stop after a while, so that the final
  // phase runs with a fixed penalty (needed for convergence).
  constexpr Index kAdaptEvery = 10;
  constexpr Index kAdaptUntil = 1000;
  for (Index it = 1; it <= max_iters; ++it) {
    x = proj.project(z - u);
    z_old = z;
    soft_threshold(x + u, 1.0 / rho, z);
    u += x - z;

    const double r = (x - z).norm();
    const double s = rho * (z - z_old).norm();
    const double eps_pri = cfg.tol * std::max(x.norm(), z.norm());
    const double eps_dual = cfg.tol * rho * u.norm();
    res.iterations = it;
    res.final_residual = r / std::max(std::max(x.norm(), z.norm()), 1e-300);
    res.dual_residual = s / std::max(rho * u.norm(), 1e-300);
    if (cfg.on_iteration) cfg.on_iteration(it, res.final_residual, res.dual_residual);
    if (r <= eps_pri && s <= eps_dual) {
      res.converged = true;
      break;
    }
    if (it % kAdaptEvery != 0 || it > kAdaptUntil) continue;
    if (r > 10.0 * s) {
      rho *= 2.0;
      u /= 2.0;
    } else if (s > 10.0 * r) {
      rho /= 2.0;
      u *= 2.0;
    }
  }
  res.inner_iterations = proj.iterations();
  x *= scale;
  Vector ax;
  A.apply(x, ax);
  res.feasibility_gap = (ax - b_raw).norm() / bnorm;
  res.l1_value = x.lpNorm<1>();
  res.coefficients = x;
  res.estimate = x;
  return res;
}

template <LinearOperator Op>
RecoveryResult basis_pursuit_direct(const Op& A, const Vector& y, const SolverConfig& cfg) {
  bool dense = cfg.projection == Projection::DenseQr;
  if (cfg.projection == Projection::Auto)
    dense = A.rows() * A.cols() <= cfg.dense_projection_cap && A.cols() <= 4096;
  if (dense) {
    Matrix M;
    if constexpr (std::same_as<Op, DenseOperator>)
      M = A.matrix();
    else
      M = probe_dense(A);
    return admm_basis_pursuit(A, y, cfg, [&](const Vector& b) { return DenseProjector(M, b); });
  }
  const Index inner = cfg.inner_max_iters > 0 ? cfg.inner_max_iters : A.rows();
  return admm_basis_pursuit(A, y, cfg, [&](const Vector& b) {
    return CgProjector<Op>(A, b, cfg.tol / 10.0, inner);
  });
}

}  // namespace detail

/// argmin ||c||_1 subject to A S c = y, where S synthesizes from `basis`.
/// The estimate is S c; the coefficients are c. The returned point is the
/// projected (feasible) ADMM iterate.
template <LinearOperator Op>
RecoveryResult basis_pursuit(const Op& A, const Vector& y,
                             const SynthesisBasis& basis = SynthesisBasis::canonical(),
                             SolverConfig cfg = {}) {
  cfg.variant = SolverVariant::BasisPursuit;
  cfg.validate();
  detail::require(y.size() == A.rows(), "basis_pursuit: measurement length mismatch");
  detail::require(y.allFinite(), "basis_pursuit: non-finite measurements");
  if (basis.kind() == SynthesisBasis::Kind::Canonical) return detail::basis_pursuit_direct(A, y, cfg);
  const SynthesisOperator<Op> composed(A, basis);
  RecoveryResult res = detail::basis_pursuit_direct(composed, y, cfg);
  res.estimate = basis.synthesize(res.coefficients);
  return res;
}

/// Convenience: fills rel_error against a known ground truth.
inline RecoveryResult& score(RecoveryResult& res, const Vector& x_star) {
  res.rel_error = relative_error(res.estimate, x_star);
  return res;
}

}  // namespace maskcs

#endif  // MASKCS_SOLVERS_HPP
