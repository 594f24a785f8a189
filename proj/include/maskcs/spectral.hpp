#ifndef MASKCS_SPECTRAL_HPP
#define MASKCS_SPECTRAL_HPP

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "format.hpp"
#include "forward_model.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace maskcs {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Column energy of G

struct ColumnNormStats {
  double theta_max = 0.0;
  double theta_min = 0.0;
  double mu = 0.0;            ///< theta_max^2 / theta_min^2 (inf when theta_min == 0)
  double theta_avg_sq = 0.0;  ///< (theta_max^2 + theta_min^2) / 2
  Vector squared_norms;       ///< ||G e_i||^2 for every pixel i
  /// False when some pixel never reaches a sensor (theta_min == 0).
  bool identifiable = false;
};

/// Squared column norms of G: sum over sensors of kernel_grid[s_n - i]^2.
inline Vector column_squared_norms(const ForwardModel& model) {
  const GridShape g = model.grid();
  const Image& kg = model.kernel_grid();
  Vector out = Vector::Zero(g.size());
  for (Index s : model.sampling().indices()) {
    const Index sr = s / g.cols, sc = s % g.cols;
    for (Index lr = 0; lr < g.rows; ++lr) {
      const Index dr = (sr - lr + g.rows) % g.rows;
      for (Index lc = 0; lc < g.cols; ++lc) {
        const double v = kg(dr, (sc - lc + g.cols) % g.cols);
        out[lr * g.cols + lc] += v * v;
      }
    }
  }
  return out;
}

inline ColumnNormStats column_norm_stats(const ForwardModel& model) {
  ColumnNormStats st;
  st.squared_norms = column_squared_norms(model);
  const double mx = st.squared_norms.maxCoeff();
  const double mn = st.squared_norms.minCoeff();
  st.theta_max = std::sqrt(mx);
  st.theta_min = std::sqrt(mn);
  st.identifiable = mn > 0.0;
  st.mu = st.identifiable ? mx / mn : kInf;
  st.theta_avg_sq = 0.5 * (mx + mn);
  return st;
}

// ---------------------------------------------------------------------------
// Operator norm of G and extreme eigenvalues of H^T H

enum class SpectralMethod { Dense, Iterative };

inline const char* to_string(SpectralMethod m) {
  return m == SpectralMethod::Dense ? "dense" : "iterative";
}

struct IterationOptions {
  double tol = 1e-8;
  Index max_iters = 0;  ///< 0: 10 * L
  Index dense_cap = Index{1} << 22;   ///< N*L limit for the dense SVD of G
  Index dense_eigen_max_L = 1024;     ///< L limit for the dense eigensolver on H^T H
  std::uint64_t seed = 0x5eed;
};

struct OperatorNormResult {
  double rho = 0.0;
  SpectralMethod method = SpectralMethod::Dense;
  Index iterations = 0;
  double achieved_tol = 0.0;
  bool converged = true;
};

namespace detail {

struct PowerResult {
  double value = 0.0;
  Index iterations = 0;
  double achieved_tol = kInf;
  bool converged = false;
};

// Largest eigenvalue of a PSD map via power iteration. Stops when the
// eigen-residual ||M v - lambda v|| falls below tol * lambda, which bounds the
// eigenvalue error by roughly tol^2 lambda^2 / gap. `step(v, out)` computes out = M v.
template <class Step>
PowerResult power_iteration(Index n, Step&& step, double tol, Index max_iters, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  v.normalize();
  PowerResult res;
  Vector w(n);
  for (Index it = 1; it <= max_iters; ++it) {
    step(v, w);
    const double lambda = v.dot(w);
    const double wn = w.norm();
    res.value = lambda;
    res.iterations = it;
    if (wn == 0.0) {
      res.achieved_tol = 0.0;
      res.converged = true;
      return res;
    }
    res.achieved_tol = (w - lambda * v).norm() / std::max(std::abs(lambda), 1e-300);
    if (res.achieved_tol <= tol) {
      res.converged = true;
      return res;
    }
    v = w / wn;
  }
  return res;
}

}  // namespace detail

/// rho = ||G||, by dense SVD when N*L fits under opts.dense_cap, otherwise by
/// power iteration on G^T G.
inline OperatorNormResult operator_norm(const ForwardModel& model, const IterationOptions& opts = {}) {
  OperatorNormResult out;
  const Index L = model.signal_size();
  if (model.sensors() * L <= opts.dense_cap) {
    const Matrix G = model.assemble_G(opts.dense_cap);
    Eigen::BDCSVD<Matrix> svd(G);
    out.rho = svd.singularValues()(0);
    out.method = SpectralMethod::Dense;
    return out;
  }
  const Index max_iters = opts.max_iters > 0 ? opts.max_iters : 10 * L;
  auto res = detail::power_iteration(
      L, [&](const Vector& v, Vector& w) { w = model.adjoint_G(model.apply_G(v)); }, opts.tol,
      max_iters, opts.seed);
  out.rho = std::sqrt(std::max(res.value, 0.0));
  out.method = SpectralMethod::Iterative;
  out.iterations = res.iterations;
  out.achieved_tol = res.achieved_tol;
  out.converged = res.converged;
  return out;
}

/// Phi^T Phi (L x L) accumulated over chunks of masks. Entries are exact
/// integers for {-1,0,1} masks.
inline Matrix mask_cross_gram(const MaskEnsemble& masks, Index chunk = 2048) {
  const Index L = masks.length(), K = masks.count();
  Matrix acc = Matrix::Zero(L, L);
  Matrix block;
  for (Index k0 = 0; k0 < K; k0 += chunk) {
    const Index c = std::min(chunk, K - k0);
    block.resize(L, c);
    for (Index j = 0; j < c; ++j) {
      const auto phi = masks.mask(k0 + j);
      for (Index i = 0; i < L; ++i) block(i, j) = phi[static_cast<std::size_t>(i)];
    }
    acc.selfadjointView<Eigen::Lower>().rankUpdate(block);
  }
  acc.triangularView<Eigen::StrictlyUpper>() = acc.transpose();
  return acc;
}

/// G^T G with its diagonal taken from column_squared_norms, so that the
/// diagonal agrees bit-for-bit with column_norm_stats.
inline Matrix sensor_gram(const ForwardModel& model, Index cap = kDefaultDenseCap) {
  const Index L = model.signal_size();
  if (L * L > cap)
    throw resource_limit_error("sensor_gram: " + std::to_string(L) + "^2 exceeds the dense cap");
  const Matrix G = model.assemble_G(cap);
  Matrix gtg = G.transpose() * G;
  gtg.diagonal() = column_squared_norms(model);
  return gtg;
}

/// H^T H = sum_k D_k G^T G D_k = (G^T G) .* (Phi^T Phi), valid for any alphabet.
inline Matrix gram_matrix(const ForwardModel& model, Index cap = kDefaultDenseCap) {
  const Matrix gtg = sensor_gram(model, cap);
  return gtg.cwiseProduct(mask_cross_gram(model.masks()));
}

struct GramExtremes {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double cond = kInf;  ///< inf when lambda_min <= 0 (rank deficient)
  SpectralMethod method = SpectralMethod::Dense;
  bool rank_deficient = false;
  Index iterations = 0;
  double achieved_tol = 0.0;
  bool converged = true;
};

inline GramExtremes gram_extremes_from(const Matrix& gram) {
  GramExtremes out;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  out.lambda_min = std::max(es.eigenvalues()(0), 0.0);
  out.lambda_max = es.eigenvalues()(gram.rows() - 1);
  out.cond = out.lambda_min > 0.0 ? out.lambda_max / out.lambda_min : kInf;
  out.rank_deficient = !(out.lambda_min > 0.0);
  return out;
}

/// Extreme eigenvalues and condition number of H^T H. Dense symmetric
/// eigendecomposition for L <= opts.dense_eigen_max_L; otherwise power iteration for lambda_max
/// and power iteration on (sigma I - H^T H), sigma = 1.01 lambda_max, for
/// lambda_min. When K*N < L, lambda_min = 0 and cond = inf without iterating.
inline GramExtremes gram_extremes(const ForwardModel& model, const IterationOptions& opts = {}) {
  const Index L = model.signal_size();
  const bool deficient = model.measurement_size() < L;
  if (L <= opts.dense_eigen_max_L) {
    auto out = gram_extremes_from(gram_matrix(model));
    if (deficient) {
      out.lambda_min = 0.0;
      out.cond = kInf;
      out.rank_deficient = true;
    }
    return out;
  }

  if (model.masks().alphabet() != MaskAlphabet::Signed)
    throw std::invalid_argument("gram_extremes: iterative route requires signed masks");
  auto hth = [&](const Vector& v, Vector& w) { w = model.adjoint_H(model.apply_H(v)); };
  const Index max_iters = opts.max_iters > 0 ? opts.max_iters : 10 * L;
  GramExtremes out;
  out.method = SpectralMethod::Iterative;
  auto top = detail::power_iteration(L, hth, opts.tol, max_iters, opts.seed);
  out.lambda_max = top.value;
  out.iterations = top.iterations;
  out.achieved_tol = top.achieved_tol;
  out.converged = top.converged;
  if (deficient) {
    out.lambda_min = 0.0;
    out.cond = kInf;
    out.rank_deficient = true;
    return out;
  }
  const double sigma = 1.01 * top.value;
  auto shifted = [&](const Vector& v, Vector& w) {
    hth(v, w);
    w = sigma * v - w;
  };
  auto low = detail::power_iteration(L, shifted, opts.tol, max_iters, derive_seed(opts.seed, {1}));
  out.lambda_min = std::max(sigma - low.value, 0.0);
  out.iterations += low.iterations;
  out.achieved_tol = std::max(out.achieved_tol, low.achieved_tol);
  out.converged = out.converged && low.converged;
  out.rank_deficient = !(out.lambda_min > 0.0);
  out.cond = out.rank_deficient ? kInf : out.lambda_max / out.lambda_min;
  return out;
}

// ---------------------------------------------------------------------------
// Bounds on the number of masks

/// (1 + t) log(1 + t) - t, defined for t > -1.
inline double psi(double t) {
  if (!(t > -1.0)) throw std::domain_error("psi(t) requires t > -1");
  return (1.0 + t) * std::log1p(t) - t;
}

struct BoundEvaluation {
  double delta = 0.0;
  double beta = 0.0;
  // Least-squares conditioning.
  long long K_required_simple = 0;
  long long K_required_refined = 0;
  double cond_guarantee = 0.0;
  // RIP of H / (sqrt(K) theta_avg). The K value is a scale, the absolute
  // constant in front of it is not known.
  double rip_K_scale = 0.0;
  double rip_constant_guarantee = 0.0;

  KeyValueRecord to_record() const {
    KeyValueRecord r;
    r.add("delta", delta).add("beta", beta);
    r.add("K_required_simple", K_required_simple).add("K_required_refined", K_required_refined);
    r.add("cond_guarantee", cond_guarantee);
    r.add("rip_K_scale", rip_K_scale).add("rip_constant_guarantee", rip_constant_guarantee);
    return r;
  }
};

namespace detail {
inline long long ceil_count(double v) {
  if (!(v < 9.0e18)) throw std::overflow_error("mask count bound does not fit in 64 bits");
  return static_cast<long long>(std::ceil(v));
}
}  // namespace detail

/// Number of masks sufficient for cond(H^T H) <= (1+delta)/(1-delta) * mu
/// with probability 1 - 2 L^-beta (natural log throughout):
///   simple:  (beta+1)/(log 4 - 1) delta^-2 (rho/theta_min)^2 log L
///   refined: (beta+1) log L max{rho^2/(psi(-delta) theta_min^2), rho^2/(psi(delta) theta_max^2)}
inline BoundEvaluation conditioning_bounds(double rho, double theta_min, double theta_max, Index L,
                                       double delta, double beta) {
  detail::require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  detail::require(beta > 0.0, "beta must be positive");
  detail::require(L >= 1, "L must be >= 1");
  detail::require(theta_max >= theta_min && rho > 0.0, "invalid column-norm statistics");
  if (!(theta_min > 0.0))
    throw std::domain_error("bound undefined: theta_min = 0 (some pixel never reaches a sensor)");

  const double logL = std::log(static_cast<double>(L));
  const double r2 = rho * rho;
  const double tmin2 = theta_min * theta_min, tmax2 = theta_max * theta_max;
  BoundEvaluation b;
  b.delta = delta;
  b.beta = beta;
  b.K_required_simple = detail::ceil_count((beta + 1.0) / (std::log(4.0) - 1.0) / (delta * delta) *
                                           (r2 / tmin2) * logL);
  const double worst = std::max(r2 / (psi(-delta) * tmin2), r2 / (psi(delta) * tmax2));
  b.K_required_refined = detail::ceil_count((beta + 1.0) * logL * worst);
  b.cond_guarantee = (1.0 + delta) / (1.0 - delta) * (tmax2 / tmin2);
  return b;
}

/// Fills rip_K_scale = delta^-2 mu^2 S log L and
/// rip_constant_guarantee = (mu - 1 + 2 delta) / (mu + 1).
inline BoundEvaluation rip_mask_scale(double mu, Index S, Index L, double delta,
                                      BoundEvaluation b = {}) {
  detail::require(mu >= 1.0, "mu must be >= 1");
  detail::require(S >= 1 && L >= 1, "S and L must be >= 1");
  detail::require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  b.delta = delta;
  b.rip_K_scale = mu * mu * static_cast<double>(S) * std::log(static_cast<double>(L)) /
                  (delta * delta);
  b.rip_constant_guarantee = (mu - 1.0 + 2.0 * delta) / (mu + 1.0);
  return b;
}

// ---------------------------------------------------------------------------
// Empirical restricted isometry constants

enum class RipMode { Exhaustive, Randomized };

struct RipEstimate {
  double delta_lower = 0.0;  ///< max over supports of 1 - lambda_min
  double delta_upper = 0.0;  ///< max over supports of lambda_max - 1
  long long supports = 0;
  RipMode mode = RipMode::Exhaustive;
};

inline constexpr double kDefaultRipBudget = 1e6;

/// binom(n, k) as a double (saturates at inf).
inline double binomial(Index n, Index k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (Index i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

/// Gram of H / (sqrt(K) theta_avg). Entry (i, j) is
/// (G^T G)_ij * ((Phi^T Phi)_ij / K) / theta_avg^2, so a diagonal entry of a
/// signed ensemble is exactly theta_i^2 / theta_avg^2.
inline Matrix scaled_gram(const ForwardModel& model, const ColumnNormStats& st) {
  const Matrix gtg = sensor_gram(model);
  const Matrix ptp = mask_cross_gram(model.masks()) / static_cast<double>(model.mask_count());
  return gtg.cwiseProduct(ptp) / st.theta_avg_sq;
}

/// Deviation of the scaled Gram from the identity on S-column submatrices,
/// over every support (exhaustive) or `trials` uniformly drawn supports
/// (randomized; a lower bound on the true constants).
inline RipEstimate empirical_rip(const ForwardModel& model, Index S, RipMode mode, Index trials = 0,
                                 std::uint64_t seed = 0, double budget = kDefaultRipBudget) {
  const Index L = model.signal_size();
  detail::require(S >= 1 && S <= L, "RIP order S must lie in [1, L]");
  if (mode == RipMode::Exhaustive && binomial(L, S) > budget)
    throw resource_limit_error("exhaustive RIP needs " + format_double(binomial(L, S)) +
                               " supports, over the budget of " + format_double(budget) +
                               "; use randomized mode");
  if (mode == RipMode::Randomized) detail::require(trials >= 1, "randomized RIP needs trials >= 1");

  const ColumnNormStats st = column_norm_stats(model);
  detail::require(st.theta_avg_sq > 0.0, "G is identically zero");
  const Matrix B = scaled_gram(model, st);

  RipEstimate est;
  est.mode = mode;
  est.delta_lower = -kInf;
  est.delta_upper = -kInf;
  Matrix sub(S, S);
  auto visit = [&](const std::vector<Index>& support) {
    double lo = 0.0, hi = 0.0;
    if (S == 1) {
      lo = hi = B(support[0], support[0]);
    } else {
      for (Index a = 0; a < S; ++a)
        for (Index b = 0; b < S; ++b) sub(a, b) = B(support[static_cast<std::size_t>(a)],
                                                    support[static_cast<std::size_t>(b)]);
      Eigen::SelfAdjointEigenSolver<Matrix> es(sub, Eigen::EigenvaluesOnly);
      lo = es.eigenvalues()(0);
      hi = es.eigenvalues()(S - 1);
    }
    est.delta_lower = std::max(est.delta_lower, 1.0 - lo);
    est.delta_upper = std::max(est.delta_upper, hi - 1.0);
    ++est.supports;
  };

  std::vector<Index> support(static_cast<std::size_t>(S));
  if (mode == RipMode::Exhaustive) {
    std::iota(support.begin(), support.end(), Index{0});
    while (true) {
      visit(support);
      Index i = S - 1;
      while (i >= 0 && support[static_cast<std::size_t>(i)] == L - S + i) --i;
      if (i < 0) break;
      ++support[static_cast<std::size_t>(i)];
      for (Index j = i + 1; j < S; ++j)
        support[static_cast<std::size_t>(j)] = support[static_cast<std::size_t>(j - 1)] + 1;
    }
  } else {
    SplitMix64 rng(seed);
    std::vector<Index> pool(static_cast<std::size_t>(L));
    for (Index t = 0; t < trials; ++t) {
      std::iota(pool.begin(), pool.end(), Index{0});
      for (Index j = 0; j < S; ++j) {
        const auto pick = j + static_cast<Index>(rng.below(static_cast<std::uint64_t>(L - j)));
        std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(pick)]);
      }
      std::copy(pool.begin(), pool.begin() + S, support.begin());
      std::sort(support.begin(), support.end());
      visit(support);
    }
  }
  return est;
}

// ---------------------------------------------------------------------------
// Summary record

struct SpectralReport {
  double rho = 0.0;
  double theta_max = 0.0;
  double theta_min = 0.0;
  double mu = 0.0;
  double theta_avg_sq = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double cond = 0.0;
  SpectralMethod method = SpectralMethod::Dense;
  bool identifiable = true;
  bool converged = true;

  KeyValueRecord to_record() const {
    KeyValueRecord r;
    r.add("rho", rho).add("theta_max", theta_max).add("theta_min", theta_min);
    r.add("mu", mu).add("theta_avg_sq", theta_avg_sq);
    r.add("lambda_min", lambda_min).add("lambda_max", lambda_max).add("cond", cond);
    r.add("method", std::string(to_string(method)));
    r.add("identifiable", identifiable).add("converged", converged);
    return r;
  }
};

inline SpectralReport spectral_report(const ForwardModel& model, const IterationOptions& opts = {}) {
  const ColumnNormStats st = column_norm_stats(model);
  const OperatorNormResult on = operator_norm(model, opts);
  const GramExtremes ge = gram_extremes(model, opts);
  SpectralReport r;
  r.rho = on.rho;
  r.theta_max = st.theta_max;
  r.theta_min = st.theta_min;
  r.mu = st.mu;
  r.theta_avg_sq = st.theta_avg_sq;
  r.lambda_min = ge.lambda_min;
  r.lambda_max = ge.lambda_max;
  r.cond = ge.cond;
  r.method = ge.method;
  r.identifiable = st.identifiable;
  r.converged = on.converged && ge.converged;
  return r;
}

}  // namespace maskcs

#endif  // MASKCS_SPECTRAL_HPP
