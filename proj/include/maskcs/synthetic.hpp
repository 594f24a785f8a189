#ifndef MASKCS_SYNTHETIC_HPP
#define MASKCS_SYNTHETIC_HPP

// Stand-in inputs for the 2D demo: a fluorescence-like RGB scene (cell
// outlines in red, bud-neck spots in green, most pixels exactly zero) and a
// defocused diffraction PSF.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "fft.hpp"
#include "image_io.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace maskcs {

struct SceneOptions {
  Index rows = 188;
  Index cols = 256;
  Index cells = 14;
  double min_radius = 13.0;
  double max_radius = 22.0;
  double ring_width = 2.2;   ///< Gaussian sigma of the outline profile, pixels
  double spot_width = 2.6;   ///< sigma of the green spots
  double floor = 0.2;        ///< intensities below this are cut to zero
};

/// Red: elliptical outlines; green: one or two spots on some outlines;
/// blue: empty. Values in [0, 1].
inline PlanarImage make_cell_scene(const SceneOptions& opt, std::uint64_t seed) {
  detail::require(opt.rows > 0 && opt.cols > 0 && opt.cells >= 0, "invalid scene size");
  SplitMix64 rng(seed);
  PlanarImage img;
  img.planes.assign(3, Image::Zero(opt.rows, opt.cols));
  Image& red = img.planes[0];
  Image& green = img.planes[1];

  for (Index c = 0; c < opt.cells; ++c) {
    const double cy = opt.max_radius + rng.uniform() * (opt.rows - 2 * opt.max_radius);
    const double cx = opt.max_radius + rng.uniform() * (opt.cols - 2 * opt.max_radius);
    const double a = opt.min_radius + rng.uniform() * (opt.max_radius - opt.min_radius);
    const double b = a * (0.75 + 0.25 * rng.uniform());
    const double th = rng.uniform() * std::numbers::pi;
    const double amp = 0.6 + 0.4 * rng.uniform();
    const double ct = std::cos(th), st = std::sin(th);
    const double reach = a + 4 * opt.ring_width;
    for (Index r = std::max<Index>(0, Index(cy - reach)); r < std::min<Index>(opt.rows, Index(cy + reach) + 1); ++r)
      for (Index q = std::max<Index>(0, Index(cx - reach)); q < std::min<Index>(opt.cols, Index(cx + reach) + 1); ++q) {
        const double dy = r - cy, dx = q - cx;
        const double u = (ct * dx + st * dy) / a, v = (-st * dx + ct * dy) / b;
        const double d = (std::sqrt(u * u + v * v) - 1.0) * 0.5 * (a + b);
        const double val = amp * std::exp(-d * d / (2 * opt.ring_width * opt.ring_width));
        red(r, q) = std::max(red(r, q), val);
      }
    const int spots = static_cast<int>(rng.below(3));
    for (int s = 0; s < spots; ++s) {
      const double ang = rng.uniform() * 2 * std::numbers::pi;
      const double sy = cy + st * a * std::cos(ang) + ct * b * std::sin(ang);
      const double sx = cx + ct * a * std::cos(ang) - st * b * std::sin(ang);
      const double samp = 0.5 + 0.5 * rng.uniform();
      const double sreach = 4 * opt.spot_width;
      for (Index r = std::max<Index>(0, Index(sy - sreach)); r < std::min<Index>(opt.rows, Index(sy + sreach) + 1); ++r)
        for (Index q = std::max<Index>(0, Index(sx - sreach)); q < std::min<Index>(opt.cols, Index(sx + sreach) + 1); ++q) {
          const double d2 = (r - sy) * (r - sy) + (q - sx) * (q - sx);
          green(r, q) = std::max(green(r, q), samp * std::exp(-d2 / (2 * opt.spot_width * opt.spot_width)));
        }
    }
  }
  for (Index p = 0; p < 2; ++p) {
    Image& pl = img.planes[static_cast<std::size_t>(p)];
    pl = ((pl.array() - opt.floor).max(0.0) / (1.0 - opt.floor)).matrix();
  }
  return img;
}

struct PsfOptions {
  Index size = 128;
  double pupil_radius = 20.0;  ///< in frequency bins of the size x size grid
  double defocus = 15.0;       ///< peak defocus phase at the pupil edge, radians
};

/// |IDFT(pupil)|^2 for a circular pupil with quadratic (defocus) phase,
/// centered and scaled to a peak of 1.
inline Image make_defocus_psf(const PsfOptions& opt) {
  detail::require(opt.size >= 2 && opt.pupil_radius > 0, "invalid PSF options");
  const int n = static_cast<int>(opt.size);
  fft::AlignedVector<fft::Complex> pupil(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double fr = r < n / 2 ? r : r - n, fc = c < n / 2 ? c : c - n;
      const double rho = std::sqrt(fr * fr + fc * fc) / opt.pupil_radius;
      if (rho <= 1.0) pupil[static_cast<std::size_t>(r) * n + c] = std::polar(1.0, opt.defocus * rho * rho);
    }
  fft::complex_dft_inplace(pupil, n, n, FFTW_BACKWARD);
  Image psf(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      psf((r + n / 2) % n, (c + n / 2) % n) = std::norm(pupil[static_cast<std::size_t>(r) * n + c]);
  return psf / psf.maxCoeff();
}

}  // namespace maskcs

#endif  // MASKCS_SYNTHETIC_HPP
