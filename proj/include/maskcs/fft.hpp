#ifndef MASKCS_FFT_HPP
#define MASKCS_FFT_HPP

// Thin RAII layer over FFTW for the two transforms the library needs:
// real-to-complex 2D DFTs (circular convolution) and 2D DCT-II/III pairs.
//
// Plans are created once per shape under a global mutex and shared; the
// new-array execute functions are thread-safe, so a plan may be used
// concurrently as long as each caller supplies its own buffers. Buffers must
// come from AlignedVector so that their alignment matches the planning arrays.
// FFTW_ESTIMATE is used on purpose: measured plans may differ between runs,
// which would break bit-exact reproducibility.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <tuple>
#include <vector>

namespace maskcs::fft {

template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() noexcept = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    void* p = fftw_malloc(n * sizeof(T));
    if (p == nullptr) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }

  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

template <class T>
using AlignedVector = std::vector<T, FftwAllocator<T>>;

using Complex = std::complex<double>;

namespace detail {

enum class Kind { RealDft, Dct };

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  PlanPair() = default;
  PlanPair(const PlanPair&) = delete;
  PlanPair& operator=(const PlanPair&) = delete;
  ~PlanPair() {
    if (forward) fftw_destroy_plan(forward);
    if (inverse) fftw_destroy_plan(inverse);
  }
};

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

inline std::shared_ptr<const PlanPair> get_plans(Kind kind, int rows, int cols) {
  static std::map<std::tuple<Kind, int, int>, std::shared_ptr<PlanPair>> cache;
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto key = std::make_tuple(kind, rows, cols);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  auto plans = std::make_shared<PlanPair>();
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  const unsigned flags = FFTW_ESTIMATE;
  if (kind == Kind::RealDft) {
    const std::size_t nc = static_cast<std::size_t>(rows) * (cols / 2 + 1);
    AlignedVector<double> r(n);
    AlignedVector<Complex> c(nc);
    auto* cp = reinterpret_cast<fftw_complex*>(c.data());
    plans->forward = fftw_plan_dft_r2c_2d(rows, cols, r.data(), cp, flags);
    plans->inverse = fftw_plan_dft_c2r_2d(rows, cols, cp, r.data(), flags);
  } else {
    AlignedVector<double> a(n), b(n);
    plans->forward = fftw_plan_r2r_2d(rows, cols, a.data(), b.data(), FFTW_REDFT10,
                                      FFTW_REDFT10, flags);
    plans->inverse = fftw_plan_r2r_2d(rows, cols, a.data(), b.data(), FFTW_REDFT01,
                                      FFTW_REDFT01, flags);
  }
  if (!plans->forward || !plans->inverse) throw std::bad_alloc();
  cache.emplace(key, plans);
  return plans;
}

}  // namespace detail

/// Unnormalized real 2D DFT on a rows x cols grid (rows may be 1).
/// The half spectrum has rows * (cols/2 + 1) entries.
class RealDft2 {
 public:
  RealDft2(int rows, int cols)
      : rows_(rows), cols_(cols), plans_(detail::get_plans(detail::Kind::RealDft, rows, cols)) {}

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(rows_) * cols_; }
  std::size_t spectrum_size() const noexcept {
    return static_cast<std::size_t>(rows_) * (cols_ / 2 + 1);
  }

  void forward(double* in, Complex* out) const {
    fftw_execute_dft_r2c(plans_->forward, in, reinterpret_cast<fftw_complex*>(out));
  }
  /// Overwrites `in`. Result is scaled by size() relative to the true inverse.
  void inverse(Complex* in, double* out) const {
    fftw_execute_dft_c2r(plans_->inverse, reinterpret_cast<fftw_complex*>(in), out);
  }

 private:
  int rows_;
  int cols_;
  std::shared_ptr<const detail::PlanPair> plans_;
};

/// Unnormalized 2D DCT-II (forward) and DCT-III (inverse), FFTW conventions.
class Dct2 {
 public:
  Dct2(int rows, int cols)
      : rows_(rows), cols_(cols), plans_(detail::get_plans(detail::Kind::Dct, rows, cols)) {}

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

  void forward(double* in, double* out) const { fftw_execute_r2r(plans_->forward, in, out); }
  void inverse(double* in, double* out) const { fftw_execute_r2r(plans_->inverse, in, out); }

 private:
  int rows_;
  int cols_;
  std::shared_ptr<const detail::PlanPair> plans_;
};

/// In-place unnormalized complex DFT of a rows x cols row-major array
/// (sign = FFTW_FORWARD or FFTW_BACKWARD). Plans on every call; meant for
/// one-off setup work, not inner loops.
inline void complex_dft_inplace(AlignedVector<Complex>& data, int rows, int cols, int sign) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan = nullptr;
  {
    std::lock_guard<std::mutex> lock(detail::planner_mutex());
    plan = fftw_plan_dft_2d(rows, cols, p, p, sign, FFTW_ESTIMATE);
  }
  if (!plan) throw std::bad_alloc();
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(detail::planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace maskcs::fft

#endif  // MASKCS_FFT_HPP
