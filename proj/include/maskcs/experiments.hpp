#ifndef MASKCS_EXPERIMENTS_HPP
#define MASKCS_EXPERIMENTS_HPP

// Monte Carlo protocols: conditioning of H^T H versus the number of masks,
// the (K, S) phase transition of basis pursuit, and the 2D DCT image demo.
//
// Every random draw is keyed by derive_seed(base_seed, {protocol, K, [S,] trial, ...}),
// so any single trial is reproducible on its own and results do not depend on
// the number of workers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dct.hpp"
#include "errors.hpp"
#include "fft.hpp"
#include "format.hpp"
#include "forward_model.hpp"
#include "image_io.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "solvers.hpp"
#include "spectral.hpp"

namespace maskcs {

// ---------------------------------------------------------------------------
// Random filters

enum class FilterModel { AllPass, LowPass };

inline const char* to_string(FilterModel f) {
  return f == FilterModel::AllPass ? "allpass" : "lowpass";
}

struct FilterSpec {
  FilterModel model = FilterModel::AllPass;
  Index bandwidth = 31;  ///< low-pass only
};

inline Vector standard_normal(Index n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

/// i.i.d. N(0, 1) kernel of length L.
inline BlurKernel make_allpass_kernel(Index L, std::uint64_t seed) {
  detail::require(L >= 1, "kernel length must be >= 1");
  return BlurKernel::one_d(standard_normal(L, seed));
}

struct LowpassDraw {
  Vector values;
  double max_imag_residue = 0.0;  ///< largest |imag| before taking the real part
};

/// Standard normal vector with DFT bins bandwidth+1 .. L-bandwidth-1
/// (inclusive, 0-based) set to zero. The zeroed set is conjugate-symmetric, so
/// the inverse transform is real up to round-off, which is discarded.
inline LowpassDraw lowpass_draw(Index L, Index bandwidth, std::uint64_t seed) {
  detail::require(L >= 3 && bandwidth >= 1 && 2 * bandwidth < L,
                  "low-pass bandwidth must satisfy 1 <= bandwidth < L/2");
  const Vector g = standard_normal(L, seed);
  fft::AlignedVector<fft::Complex> buf(static_cast<std::size_t>(L));
  for (Index i = 0; i < L; ++i) buf[static_cast<std::size_t>(i)] = g[i];
  fft::complex_dft_inplace(buf, 1, static_cast<int>(L), FFTW_FORWARD);
  for (Index f = bandwidth + 1; f <= L - bandwidth - 1; ++f) buf[static_cast<std::size_t>(f)] = 0.0;
  fft::complex_dft_inplace(buf, 1, static_cast<int>(L), FFTW_BACKWARD);
  LowpassDraw out;
  out.values.resize(L);
  for (Index i = 0; i < L; ++i) {
    const auto c = buf[static_cast<std::size_t>(i)] / static_cast<double>(L);
    out.values[i] = c.real();
    out.max_imag_residue = std::max(out.max_imag_residue, std::abs(c.imag()));
  }
  return out;
}

inline BlurKernel make_lowpass_kernel(Index L, Index bandwidth, std::uint64_t seed) {
  return BlurKernel::one_d(lowpass_draw(L, bandwidth, seed).values);
}

inline BlurKernel make_kernel(const FilterSpec& f, Index L, std::uint64_t seed) {
  return f.model == FilterModel::AllPass ? make_allpass_kernel(L, seed)
                                         : make_lowpass_kernel(L, f.bandwidth, seed);
}

// ---------------------------------------------------------------------------
// Quantiles

/// Empirical quantiles by linear interpolation between order statistics:
/// with sorted x and h = (n - 1) p, q = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
/// Infinite samples are ordered last and propagate when they are interpolated into.
inline std::vector<double> quantiles(std::vector<double> samples, const std::vector<double>& probs) {
  detail::require(!samples.empty(), "quantiles of an empty sample");
  for (double p : probs) detail::require(p >= 0.0 && p <= 1.0, "quantile probability outside [0, 1]");
  for (double s : samples) detail::require(!std::isnan(s), "NaN sample");
  std::sort(samples.begin(), samples.end());
  std::vector<double> out;
  out.reserve(probs.size());
  const auto n = samples.size();
  for (double p : probs) {
    const double h = static_cast<double>(n - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = h - static_cast<double>(lo);
    const double a = samples[lo], b = samples[hi];
    if (frac == 0.0 || a == b)
      out.push_back(a);
    else if (std::isinf(b))
      out.push_back(b);
    else
      out.push_back(a + frac * (b - a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

/// Inclusive arithmetic range.
struct IndexRange {
  Index start = 1;
  Index stop = 1;
  Index step = 1;

  std::vector<Index> values() const {
    std::vector<Index> v;
    for (Index x = start; x <= stop; x += step) v.push_back(x);
    return v;
  }
};

struct ExperimentConfig {
  Index L = 512;
  Index N = 4;
  IndexRange K{128, 512, 32};
  // Sparsity grid for phase transitions: S_first, then multiples of S_step
  // above it, up to S_max (0: L). Each K stops at the first S whose success
  // rate falls below 1%.
  Index S_first = 1;
  Index S_step = 8;
  Index S_max = 0;
  Index trials = 25;
  FilterSpec filter;
  double success_threshold = 0.05;
  std::uint64_t base_seed = 1;
  std::vector<double> quantile_probs{0.10, 0.50, 0.90};
  unsigned workers = 1;
  SolverConfig solver;

  void validate() const {
    detail::require(L >= 2 && N >= 1 && N <= L, "need L >= 2 and 1 <= N <= L");
    detail::require(K.step >= 1 && K.start >= 1 && K.start <= K.stop, "empty K range");
    detail::require(trials >= 1, "trials must be >= 1");
    detail::require(success_threshold > 0.0 && success_threshold < 1.0,
                    "success threshold must lie in (0, 1)");
    detail::require(S_first >= 0 && S_step >= 1 && S_max >= 0 && S_max <= L, "invalid S grid");
    detail::require(!quantile_probs.empty(), "no quantiles requested");
    if (filter.model == FilterModel::LowPass)
      detail::require(filter.bandwidth >= 1 && 2 * filter.bandwidth < L,
                      "low-pass bandwidth must satisfy 1 <= bandwidth < L/2");
    solver.validate();
  }

  std::vector<Index> sparsity_grid() const {
    const Index smax = S_max > 0 ? S_max : L;
    std::vector<Index> v;
    if (S_first <= smax) v.push_back(S_first);
    for (Index s = S_step; s <= smax; s += S_step)
      if (s > S_first) v.push_back(s);
    return v;
  }

  /// L=512, N=4, K=128..512 step 32, 25 trials, bandwidth 31 (a 2048 -> 512
  /// rescaling of bandwidth 127).
  static ExperimentConfig desk_condition_sweep() { return {}; }

  /// L=2048, N=4, K=512..2048 step 32, 100 trials, bandwidth 127.
  static ExperimentConfig full_condition_sweep() {
    ExperimentConfig c;
    c.L = 2048;
    c.K = {512, 2048, 32};
    c.trials = 100;
    c.filter.bandwidth = 127;
    return c;
  }

  /// L=256, N=4, K=8..128 step 8, 50 trials, threshold 5%.
  static ExperimentConfig desk_phase_transition() {
    ExperimentConfig c;
    c.L = 256;
    c.K = {8, 128, 8};
    c.trials = 50;
    c.filter.bandwidth = 15;
    return c;
  }

  /// L=2048, N=4, K=8..256 step 8, 100 trials, threshold 5%.
  static ExperimentConfig full_phase_transition() {
    ExperimentConfig c;
    c.L = 2048;
    c.K = {8, 256, 8};
    c.trials = 100;
    c.filter.bandwidth = 127;
    c.S_first = 8;
    return c;
  }
};

namespace seed_tag {
inline constexpr std::uint64_t condition = 1;
inline constexpr std::uint64_t phase = 2;
inline constexpr std::uint64_t demo = 3;
}  // namespace seed_tag

// ---------------------------------------------------------------------------
// Condition-number sweep

struct ConditionRow {
  Index K = 0;
  std::vector<double> q;        ///< requested quantiles of cond(H^T H)
  bool rank_deficient = false;  ///< K*N < L: every trial has cond = inf
};

/// Per (K, trial): fresh kernel and masks, fixed uniform sampling; cond(H^T H)
/// from the dense Gram. Rows with K*N < L are reported as inf and flagged.
inline std::vector<ConditionRow> condition_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto Ks = cfg.K.values();
  const auto sampling = SamplingPattern::uniform(cfg.L, cfg.N);
  const Index T = cfg.trials;
  std::vector<double> conds(Ks.size() * static_cast<std::size_t>(T));
  parallel_for(static_cast<Index>(conds.size()), cfg.workers, [&](Index job) {
    const Index K = Ks[static_cast<std::size_t>(job / T)];
    const Index t = job % T;
    if (K * cfg.N < cfg.L) {
      conds[static_cast<std::size_t>(job)] = kInf;
      return;
    }
    const auto uK = static_cast<std::uint64_t>(K), ut = static_cast<std::uint64_t>(t);
    const auto kernel = make_kernel(cfg.filter, cfg.L,
                                    derive_seed(cfg.base_seed, {seed_tag::condition, uK, ut, 0}));
    const auto masks = generate_masks(cfg.L, K, MaskAlphabet::Signed,
                                      derive_seed(cfg.base_seed, {seed_tag::condition, uK, ut, 1}));
    const ForwardModel model(kernel, sampling, masks);
    conds[static_cast<std::size_t>(job)] = gram_extremes(model).cond;
  });
  std::vector<ConditionRow> rows;
  for (std::size_t i = 0; i < Ks.size(); ++i) {
    std::vector<double> sample(conds.begin() + static_cast<std::ptrdiff_t>(i * T),
                               conds.begin() + static_cast<std::ptrdiff_t>((i + 1) * T));
    rows.push_back({Ks[i], quantiles(sample, cfg.quantile_probs), Ks[i] * cfg.N < cfg.L});
  }
  return rows;
}

inline std::string quantile_column(double p) {
  return "q" + format_double(100.0 * p, 6);
}

/// Header K,q10,q50,q90 (for the default quantiles); 6 significant digits.
inline void write_condition_csv(std::ostream& out, const std::vector<ConditionRow>& rows,
                                const std::vector<double>& probs) {
  out << "K";
  for (double p : probs) out << "," << quantile_column(p);
  out << "\n";
  for (const auto& r : rows) {
    out << r.K;
    for (double v : r.q) out << "," << format_double(v, 6);
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Phase transition

struct PhaseCell {
  Index K = 0;
  Index S = 0;
  Index successes = 0;
  Index trials = 0;
  double success_rate = 0.0;
  Index nonconverged = 0;          ///< solver hit max_iters (counted as failures)
  Index infeasible_successes = 0;  ///< successes whose feasibility gap exceeded tol
};

/// Random S-sparse signal: support uniform over all S-subsets, values N(0, 1).
inline Vector sparse_signal(Index L, Index S, std::uint64_t seed) {
  detail::require(S >= 0 && S <= L, "sparsity outside [0, L]");
  SplitMix64 rng(seed);
  std::vector<Index> pool(static_cast<std::size_t>(L));
  std::iota(pool.begin(), pool.end(), Index{0});
  Vector x = Vector::Zero(L);
  for (Index j = 0; j < S; ++j) {
    const auto pick = j + static_cast<Index>(rng.below(static_cast<std::uint64_t>(L - j)));
    std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(pick)]);
  }
  for (Index j = 0; j < S; ++j) x[pool[static_cast<std::size_t>(j)]] = rng.normal();
  return x;
}

struct PhaseTrial {
  bool success = false;
  bool converged = false;
  double rel_error = 0.0;
  double feasibility_gap = 0.0;
};

/// One noiseless basis-pursuit trial of the (K, S) cell.
inline PhaseTrial phase_trial(const ExperimentConfig& cfg, Index K, Index S, Index t) {
  const auto uK = static_cast<std::uint64_t>(K), uS = static_cast<std::uint64_t>(S),
             ut = static_cast<std::uint64_t>(t);
  const std::uint64_t cell = derive_seed(cfg.base_seed, {seed_tag::phase, uK, uS, ut});
  const ForwardModel model(make_kernel(cfg.filter, cfg.L, derive_seed(cell, {0})),
                           SamplingPattern::uniform(cfg.L, cfg.N),
                           generate_masks(cfg.L, K, MaskAlphabet::Signed, derive_seed(cell, {1})));
  const Vector x_star = sparse_signal(cfg.L, S, derive_seed(cell, {2}));
  const Vector y = model.apply_H(x_star);
  const RecoveryResult res = basis_pursuit(model, y, SynthesisBasis::canonical(), cfg.solver);
  PhaseTrial out;
  out.converged = res.converged;
  out.feasibility_gap = res.feasibility_gap;
  out.rel_error = S == 0 ? res.estimate.norm() : relative_error(res.estimate, x_star);
  out.success = res.converged && (S == 0 ? out.rel_error == 0.0 : out.rel_error <= cfg.success_threshold);
  return out;
}

/// For each K: S over the sparsity grid until the success rate drops below 1%.
/// Cells are emitted sorted by (K, S).
inline std::vector<PhaseCell> phase_transition(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<PhaseCell> cells;
  const auto grid = cfg.sparsity_grid();
  for (Index K : cfg.K.values()) {
    for (Index S : grid) {
      std::vector<PhaseTrial> trials(static_cast<std::size_t>(cfg.trials));
      parallel_for(cfg.trials, cfg.workers,
                   [&](Index t) { trials[static_cast<std::size_t>(t)] = phase_trial(cfg, K, S, t); });
      PhaseCell c;
      c.K = K;
      c.S = S;
      c.trials = cfg.trials;
      for (const auto& tr : trials) {
        c.successes += tr.success ? 1 : 0;
        c.nonconverged += tr.converged ? 0 : 1;
        if (tr.success && tr.feasibility_gap > cfg.solver.tol) ++c.infeasible_successes;
      }
      c.success_rate = static_cast<double>(c.successes) / static_cast<double>(c.trials);
      cells.push_back(c);
      if (c.success_rate < 0.01) break;
    }
  }
  return cells;
}

/// Header K,S,successes,trials,success_rate.
inline void write_phase_csv(std::ostream& out, const std::vector<PhaseCell>& cells) {
  out << "K,S,successes,trials,success_rate\n";
  for (const auto& c : cells)
    out << c.K << "," << c.S << "," << c.successes << "," << c.trials << ","
        << format_double(c.success_rate, 6) << "\n";
}

/// Largest S with success rate >= level at this K (0 when there is none).
inline Index success_boundary(const std::vector<PhaseCell>& cells, Index K, double level = 0.5) {
  Index best = 0;
  for (const auto& c : cells)
    if (c.K == K && c.success_rate >= level) best = std::max(best, c.S);
  return best;
}

// ---------------------------------------------------------------------------
// 2D demo

struct DemoConfig {
  Index K = 50;
  Index stride = 11;
  MaskAlphabet alphabet = MaskAlphabet::Binary;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  SolverConfig solver = default_solver();
  std::optional<MaskEnsemble> masks;  ///< replaces the seeded draw when set (K is then ignored)

  static SolverConfig default_solver() {
    SolverConfig s;
    s.tol = 5e-3;
    s.max_iters = 500;
    s.projection = Projection::InnerCg;
    s.inner_max_iters = 200;
    return s;
  }
};

struct DemoResult {
  PlanarImage estimate;
  PlanarImage abs_error;
  double rel_error = 0.0;
  std::vector<RecoveryResult> channels;
  Index L = 0;
  Index N = 0;
  Index K = 0;
  GridShape measurement_layout;
  MaskAlphabet alphabet = MaskAlphabet::Binary;
  std::uint64_t seed = 0;
  bool converged = true;

  double undersampling() const { return static_cast<double>(K * N) / static_cast<double>(L); }

  KeyValueRecord metrics() const {
    KeyValueRecord r;
    r.add("rel_error", rel_error);
    r.add("L", L).add("N", N).add("K", K);
    r.add("measurement_rows", measurement_layout.rows).add("measurement_cols", measurement_layout.cols);
    r.add("undersampling", undersampling());
    r.add("masks", std::string(to_string(alphabet))).add("seed", seed);
    r.add("converged", converged);
    for (std::size_t c = 0; c < channels.size(); ++c) {
      const std::string p = "channel" + std::to_string(c) + ".";
      const auto& ch = channels[c];
      r.add(p + "rel_error", ch.rel_error).add(p + "iterations", ch.iterations);
      r.add(p + "inner_iterations", ch.inner_iterations);
      r.add(p + "feasibility_gap", ch.feasibility_gap).add(p + "converged", ch.converged);
    }
    return r;
  }
};

/// Masked, blurred, stride-subsampled acquisition of every channel followed by
/// basis pursuit in the 2D DCT basis. Binary masks are measured as 0/1 and
/// converted to the signed operator with one extra all-ones measurement. All
/// channels share the PSF (normalized to unit sum) and the masks.
inline DemoResult image_demo_2d(const PlanarImage& scene, const Image& psf, const DemoConfig& cfg) {
  detail::require(scene.channels() >= 1, "scene has no channels");
  detail::require(cfg.K >= 1 && cfg.stride >= 1, "K and stride must be >= 1");
  detail::require(!cfg.masks || cfg.masks->length() == scene.rows() * scene.cols(),
                  "supplied masks do not match the image size");
  const GridShape grid{scene.rows(), scene.cols()};
  detail::require(psf.rows() <= grid.rows && psf.cols() <= grid.cols,
                  "PSF is larger than the image");
  detail::require(psf.sum() > 0.0, "PSF must have positive total energy");
  cfg.solver.validate();

  const BlurKernel kernel = BlurKernel::two_d(psf / psf.sum());
  const auto sampling = SamplingPattern::strided(grid, cfg.stride);
  const MaskEnsemble masks = cfg.masks ? *cfg.masks
                                       : generate_masks(grid.size(), cfg.K, cfg.alphabet,
                                                        derive_seed(cfg.seed, {seed_tag::demo}));
  const ForwardModel acquisition(kernel, sampling, masks);
  const ForwardModel op = acquisition.with_masks(masks.to_signed());
  const auto basis = SynthesisBasis::dct2(grid);

  DemoResult out;
  out.L = grid.size();
  out.N = sampling.count();
  out.K = masks.count();
  out.measurement_layout = sampling.layout();
  out.alphabet = masks.alphabet();
  out.seed = cfg.seed;
  const auto nch = static_cast<std::size_t>(scene.channels());
  out.channels.resize(nch);
  out.estimate.planes.resize(nch);
  out.abs_error.planes.resize(nch);

  parallel_for(scene.channels(), cfg.workers, [&](Index ch) {
    const auto c = static_cast<std::size_t>(ch);
    const Image& plane = scene.planes[c];
    const Vector x = Eigen::Map<const Vector>(plane.data(), plane.size());
    Vector y;
    if (masks.alphabet() == MaskAlphabet::Binary)
      y = measurements_binary_to_signed(acquisition.measure(x), acquisition.apply_G(x));
    else
      y = op.apply_H(x);
    RecoveryResult res = basis_pursuit(op, y, basis, cfg.solver);
    if (x.norm() > 0.0) res.rel_error = relative_error(res.estimate, x);
    else res.rel_error = res.estimate.norm();
    out.estimate.planes[c] = Eigen::Map<const Image>(res.estimate.data(), grid.rows, grid.cols);
    out.abs_error.planes[c] = (out.estimate.planes[c] - plane).cwiseAbs();
    out.channels[c] = std::move(res);
  });

  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < nch; ++c) {
    num += out.abs_error.planes[c].squaredNorm();
    den += scene.planes[c].squaredNorm();
    out.converged = out.converged && out.channels[c].converged;
  }
  detail::require(den > 0.0, "scene is entirely zero");
  out.rel_error = std::sqrt(num / den);
  return out;
}

}  // namespace maskcs

#endif  // MASKCS_EXPERIMENTS_HPP
