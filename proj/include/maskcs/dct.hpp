#ifndef MASKCS_DCT_HPP
#define MASKCS_DCT_HPP

#include <cmath>

#include "errors.hpp"
#include "fft.hpp"
#include "types.hpp"

namespace maskcs {

namespace detail {

// FFTW's REDFT10 is 2 * sum x_n cos(pi k (n + 1/2) / n); the orthonormal
// DCT-II rescales bin k by sqrt(1/(4n)) for k = 0 and sqrt(1/(2n)) otherwise.
// REDFT01 is x_0 + 2 * sum x_k cos(...); the orthonormal inverse needs
// pre-scaling by sqrt(1/n) for k = 0 and sqrt(1/(2n)) otherwise.
inline Vector dct_axis_scale(Index n, bool analysis) {
  Vector s = Vector::Constant(n, std::sqrt(1.0 / (2.0 * static_cast<double>(n))));
  s[0] = analysis ? std::sqrt(1.0 / (4.0 * static_cast<double>(n)))
                  : std::sqrt(1.0 / static_cast<double>(n));
  return s;
}

inline Image dct2_apply(const Image& in, bool analysis) {
  detail::require(in.size() > 0, "empty image");
  detail::require(in.allFinite(), "non-finite entries");
  const Index rows = in.rows(), cols = in.cols();
  const fft::Dct2 dct(static_cast<int>(rows), static_cast<int>(cols));
  const Vector sr = dct_axis_scale(rows, analysis);
  const Vector sc = dct_axis_scale(cols, analysis);
  fft::AlignedVector<double> a(static_cast<std::size_t>(in.size()));
  fft::AlignedVector<double> b(a.size());
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      a[static_cast<std::size_t>(r * cols + c)] = analysis ? in(r, c) : in(r, c) * sr[r] * sc[c];
  if (analysis)
    dct.forward(a.data(), b.data());
  else
    dct.inverse(a.data(), b.data());
  Image out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      const double v = b[static_cast<std::size_t>(r * cols + c)];
      out(r, c) = analysis ? v * sr[r] * sc[c] : v;
    }
  return out;
}

}  // namespace detail

/// Orthonormal 2D DCT-II: coefficients of an image.
inline Image dct2_analyze(const Image& image) { return detail::dct2_apply(image, true); }

/// Inverse of dct2_analyze (orthonormal 2D DCT-III).
inline Image dct2_synthesize(const Image& coefficients) {
  return detail::dct2_apply(coefficients, false);
}

/// Representation the unknowns are expressed in.
class SynthesisBasis {
 public:
  enum class Kind { Canonical, Dct2 };

  static SynthesisBasis canonical() { return SynthesisBasis(Kind::Canonical, {}); }
  static SynthesisBasis dct2(GridShape shape) {
    detail::require(shape.size() > 0, "empty DCT shape");
    return SynthesisBasis(Kind::Dct2, shape);
  }

  Kind kind() const noexcept { return kind_; }
  GridShape shape() const noexcept { return shape_; }
  bool orthonormal() const noexcept { return true; }

  /// Coefficients (flat, row-major) to signal.
  Vector synthesize(const Vector& c) const {
    if (kind_ == Kind::Canonical) return c;
    return flat(dct2_synthesize(as_image(c)));
  }

  /// Signal to coefficients; the adjoint (and inverse) of synthesize.
  Vector analyze(const Vector& x) const {
    if (kind_ == Kind::Canonical) return x;
    return flat(dct2_analyze(as_image(x)));
  }

 private:
  SynthesisBasis(Kind kind, GridShape shape) : kind_(kind), shape_(shape) {}

  Image as_image(const Vector& v) const {
    detail::require(v.size() == shape_.size(), "vector length does not match DCT shape");
    return Eigen::Map<const Image>(v.data(), shape_.rows, shape_.cols);
  }
  static Vector flat(const Image& img) {
    return Eigen::Map<const Vector>(img.data(), img.size());
  }

  Kind kind_;
  GridShape shape_;
};

}  // namespace maskcs

#endif  // MASKCS_DCT_HPP
