#ifndef MASKCS_FORWARD_MODEL_HPP
#define MASKCS_FORWARD_MODEL_HPP

#include <algorithm>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

#include "errors.hpp"
#include "fft.hpp"
#include "kernel.hpp"
#include "masks.hpp"
#include "types.hpp"

namespace maskcs {

/// Default cap on the number of entries of any densely assembled operator.
inline constexpr Index kDefaultDenseCap = Index{1} << 26;

/// Matrix-free random-mask acquisition model.
///
/// G is circular convolution with the kernel on the sampling grid followed by
/// restriction to the sensor positions; mask k acts as the diagonal D_k. The
/// stacked operator H = [G D_1; ...; G D_K] maps L pixels to K*N measurements,
/// block k holding G(phi_k .* x).
///
/// apply_H/adjoint_H (and the LinearOperator interface) require signed masks.
/// measure() simulates acquisition with whatever alphabet the masks use.
///
/// Immutable after construction; copies share the kernel spectrum.
class ForwardModel {
 public:
  ForwardModel(BlurKernel kernel, SamplingPattern sampling, MaskEnsemble masks)
      : state_(std::make_shared<State>(std::move(kernel), std::move(sampling), std::move(masks))) {}

  Index signal_size() const noexcept { return state_->grid.size(); }
  Index sensors() const noexcept { return state_->sampling.count(); }
  Index mask_count() const noexcept { return state_->masks.count(); }
  Index measurement_size() const noexcept { return mask_count() * sensors(); }
  GridShape grid() const noexcept { return state_->grid; }

  const BlurKernel& kernel() const noexcept { return state_->kernel; }
  const SamplingPattern& sampling() const noexcept { return state_->sampling; }
  const MaskEnsemble& masks() const noexcept { return state_->masks; }
  /// Kernel as laid out on the periodic grid (first column of the circulant).
  const Image& kernel_grid() const noexcept { return state_->kernel_grid; }

  /// Same kernel and sampling, different masks.
  ForwardModel with_masks(MaskEnsemble masks) const {
    return ForwardModel(state_->kernel, state_->sampling, std::move(masks));
  }

  Vector apply_G(const Vector& x) const {
    check_size(x, signal_size(), "apply_G");
    Scratch s(*state_);
    Vector y(sensors());
    std::copy(x.data(), x.data() + x.size(), s.real.data());
    convolve_and_sample(s, y.data());
    return y;
  }

  Vector adjoint_G(const Vector& y) const {
    check_size(y, sensors(), "adjoint_G");
    Scratch s(*state_);
    spread_and_correlate(s, y.data());
    Vector x(signal_size());
    const double scale = 1.0 / static_cast<double>(signal_size());
    for (Index i = 0; i < x.size(); ++i) x[i] = s.real[static_cast<std::size_t>(i)] * scale;
    return x;
  }

  Vector apply_H(const Vector& x) const {
    require_signed("apply_H");
    return measure(x);
  }

  Vector adjoint_H(const Vector& y) const {
    require_signed("adjoint_H");
    check_size(y, measurement_size(), "adjoint_H");
    Vector x = Vector::Zero(signal_size());
    accumulate_adjoint(y, x);
    return x;
  }

  /// Stacked measurements G(phi_k .* x), any alphabet.
  Vector measure(const Vector& x) const {
    check_size(x, signal_size(), "measure");
    Vector y(measurement_size());
    Scratch s(*state_);
    const Index L = signal_size(), N = sensors();
    for (Index k = 0; k < mask_count(); ++k) {
      const auto phi = masks().mask(k);
      for (Index i = 0; i < L; ++i) s.real[static_cast<std::size_t>(i)] = phi[static_cast<std::size_t>(i)] * x[i];
      convolve_and_sample(s, y.data() + k * N);
    }
    return y;
  }

  // LinearOperator interface (H).
  Index rows() const noexcept { return measurement_size(); }
  Index cols() const noexcept { return signal_size(); }
  void apply(const Vector& x, Vector& y) const { y = apply_H(x); }
  void adjoint(const Vector& y, Vector& x) const { x = adjoint_H(y); }

  /// Dense N x L matrix of G, entry (n, l) = kernel_grid[s_n - l] (periodic).
  Matrix assemble_G(Index cap = kDefaultDenseCap) const {
    check_cap(sensors(), cap, "assemble_G");
    const GridShape g = grid();
    const auto& idx = sampling().indices();
    const Image& kg = kernel_grid();
    Matrix G(sensors(), signal_size());
    for (Index n = 0; n < sensors(); ++n) {
      const Index sr = idx[static_cast<std::size_t>(n)] / g.cols;
      const Index sc = idx[static_cast<std::size_t>(n)] % g.cols;
      for (Index lr = 0; lr < g.rows; ++lr) {
        const Index dr = (sr - lr + g.rows) % g.rows;
        for (Index lc = 0; lc < g.cols; ++lc) {
          const Index dc = (sc - lc + g.cols) % g.cols;
          G(n, lr * g.cols + lc) = kg(dr, dc);
        }
      }
    }
    return G;
  }

  /// Dense K*N x L matrix of H; row k*N + n, column l is phi_k(l) * G(n, l).
  /// Throws resource_limit_error when K*N*L exceeds `cap`.
  Matrix assemble_dense(Index cap = kDefaultDenseCap) const {
    check_cap(measurement_size(), cap, "assemble_dense");
    const Matrix G = assemble_G(cap);
    const Index N = sensors();
    Matrix H(measurement_size(), signal_size());
    for (Index k = 0; k < mask_count(); ++k) {
      const auto phi = masks().mask(k);
      for (Index l = 0; l < signal_size(); ++l)
        H.block(k * N, l, N, 1) = phi[static_cast<std::size_t>(l)] * G.col(l);
    }
    return H;
  }

  /// G G^T (N x N): entry (n, m) is the periodic autocorrelation of the kernel
  /// at offset s_n - s_m. Equals every diagonal block of H H^T for signed masks.
  Matrix sensor_outer_gram() const {
    const GridShape g = grid();
    const Image& kg = kernel_grid();
    // autocorrelation a[d] = sum_l kg[l] kg[l - d]
    Scratch s(*state_);
    std::copy(kg.data(), kg.data() + kg.size(), s.real.data());
    state_->dft.forward(s.real.data(), s.spec.data());
    for (auto& c : s.spec) c = std::norm(c);
    state_->dft.inverse(s.spec.data(), s.real.data());
    const double scale = 1.0 / static_cast<double>(signal_size());
    const auto& idx = sampling().indices();
    const Index N = sensors();
    Matrix out(N, N);
    for (Index n = 0; n < N; ++n) {
      const Index nr = idx[static_cast<std::size_t>(n)] / g.cols, nc = idx[static_cast<std::size_t>(n)] % g.cols;
      for (Index m = 0; m < N; ++m) {
        const Index mr = idx[static_cast<std::size_t>(m)] / g.cols, mc = idx[static_cast<std::size_t>(m)] % g.cols;
        const Index dr = (nr - mr + g.rows) % g.rows, dc = (nc - mc + g.cols) % g.cols;
        out(n, m) = s.real[static_cast<std::size_t>(dr * g.cols + dc)] * scale;
      }
    }
    return 0.5 * (out + out.transpose());
  }

  /// Block-Jacobi preconditioner for H H^T: applies (G G^T)^+ to every
  /// measurement block, eigenvalues floored at 1e-10 of the largest. Only
  /// available for signed masks with at most kMaxPreconditionedSensors sensors;
  /// returns false (and leaves `out` untouched) otherwise.
  static constexpr Index kMaxPreconditionedSensors = 2048;

  bool precondition_outer_gram(const Vector& r, Vector& out) const {
    if (masks().alphabet() != MaskAlphabet::Signed || sensors() > kMaxPreconditionedSensors)
      return false;
    std::call_once(state_->precond_once, [&] {
      Eigen::SelfAdjointEigenSolver<Matrix> es(sensor_outer_gram());
      const Vector& ev = es.eigenvalues();
      const double floor = std::max(ev.maxCoeff(), 0.0) * 1e-10;
      Vector inv(ev.size());
      for (Index i = 0; i < ev.size(); ++i) inv[i] = ev[i] > floor ? 1.0 / ev[i] : 1.0 / std::max(floor, 1e-300);
      state_->precond = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    });
    const Index N = sensors(), K = mask_count();
    out.resize(r.size());
    Eigen::Map<Matrix>(out.data(), N, K).noalias() =
        state_->precond * Eigen::Map<const Matrix>(r.data(), N, K);
    return true;
  }

 private:
  struct State {
    State(BlurKernel k, SamplingPattern s, MaskEnsemble m)
        : kernel(std::move(k)),
          sampling(std::move(s)),
          masks(std::move(m)),
          grid(sampling.grid()),
          kernel_grid(kernel.on_grid(grid)),
          dft(static_cast<int>(grid.rows), static_cast<int>(grid.cols)),
          spectrum(dft.spectrum_size()) {
      detail::require(masks.length() == grid.size(),
                      "mask length " + std::to_string(masks.length()) +
                          " does not match signal size " + std::to_string(grid.size()));
      fft::AlignedVector<double> buf(kernel_grid.data(), kernel_grid.data() + kernel_grid.size());
      dft.forward(buf.data(), spectrum.data());
    }

    BlurKernel kernel;
    SamplingPattern sampling;
    MaskEnsemble masks;
    GridShape grid;
    Image kernel_grid;
    fft::RealDft2 dft;
    fft::AlignedVector<fft::Complex> spectrum;
    mutable std::once_flag precond_once;
    mutable Matrix precond;
  };

  struct Scratch {
    explicit Scratch(const State& st) : real(st.dft.size()), spec(st.dft.spectrum_size()) {}
    fft::AlignedVector<double> real;
    fft::AlignedVector<fft::Complex> spec;
  };

  // s.real holds the (modulated) signal on entry; writes N samples to out.
  void convolve_and_sample(Scratch& s, double* out) const {
    const State& st = *state_;
    st.dft.forward(s.real.data(), s.spec.data());
    for (std::size_t j = 0; j < s.spec.size(); ++j) s.spec[j] *= st.spectrum[j];
    st.dft.inverse(s.spec.data(), s.real.data());
    const double scale = 1.0 / static_cast<double>(signal_size());
    const auto& idx = st.sampling.indices();
    for (std::size_t n = 0; n < idx.size(); ++n)
      out[n] = s.real[static_cast<std::size_t>(idx[n])] * scale;
  }

  // Scatters y onto the sensor positions and correlates with the kernel.
  // Leaves L * (G^T y) in s.real.
  void spread_and_correlate(Scratch& s, const double* y) const {
    const State& st = *state_;
    std::fill(s.real.begin(), s.real.end(), 0.0);
    const auto& idx = st.sampling.indices();
    for (std::size_t n = 0; n < idx.size(); ++n) s.real[static_cast<std::size_t>(idx[n])] = y[n];
    st.dft.forward(s.real.data(), s.spec.data());
    for (std::size_t j = 0; j < s.spec.size(); ++j) s.spec[j] *= std::conj(st.spectrum[j]);
    st.dft.inverse(s.spec.data(), s.real.data());
  }

  void accumulate_adjoint(const Vector& y, Vector& x) const {
    Scratch s(*state_);
    const Index L = signal_size(), N = sensors();
    const double scale = 1.0 / static_cast<double>(L);
    for (Index k = 0; k < mask_count(); ++k) {
      spread_and_correlate(s, y.data() + k * N);
      const auto phi = masks().mask(k);
      for (Index i = 0; i < L; ++i)
        x[i] += phi[static_cast<std::size_t>(i)] * s.real[static_cast<std::size_t>(i)] * scale;
    }
  }

  void require_signed(const char* op) const {
    detail::require(masks().alphabet() == MaskAlphabet::Signed,
                    std::string(op) +
                        " requires signed masks; convert binary data with "
                        "measurements_binary_to_signed and masks with to_signed()");
  }

  static void check_size(const Vector& v, Index expected, const char* op) {
    detail::require(v.size() == expected, std::string(op) + ": expected length " +
                                              std::to_string(expected) + ", got " +
                                              std::to_string(v.size()));
  }

  void check_cap(Index rows, Index cap, const char* op) const {
    if (rows * signal_size() > cap)
      throw resource_limit_error(std::string(op) + ": " + std::to_string(rows) + " x " +
                                 std::to_string(signal_size()) + " exceeds the dense cap of " +
                                 std::to_string(cap) + " entries");
  }

  std::shared_ptr<const State> state_;
};

}  // namespace maskcs

#endif  // MASKCS_FORWARD_MODEL_HPP
