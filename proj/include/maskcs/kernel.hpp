#ifndef MASKCS_KERNEL_HPP
#define MASKCS_KERNEL_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "types.hpp"

namespace maskcs {

/// Real convolution kernel defining a circulant blur.
///
/// A 1D kernel is the first column of the circulant matrix: entry j lands on
/// grid offset j. A 2D kernel (a PSF) is centered, so entry (kr/2, kc/2)
/// lands on offset (0, 0); this keeps blurred images registered with the scene.
/// Kernels smaller than the grid are zero-padded.
class BlurKernel {
 public:
  enum class Dims { OneD, TwoD };

  static BlurKernel one_d(const Vector& values) {
    Image v(1, values.size());
    v.row(0) = values.transpose();
    return BlurKernel(Dims::OneD, std::move(v));
  }

  static BlurKernel two_d(Image values) { return BlurKernel(Dims::TwoD, std::move(values)); }

  Dims dims() const noexcept { return dims_; }
  const Image& values() const noexcept { return values_; }
  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }

  /// Kernel laid out on a periodic grid of the given shape.
  Image on_grid(GridShape grid) const {
    detail::require(rows() <= grid.rows && cols() <= grid.cols,
                    "kernel " + std::to_string(rows()) + "x" + std::to_string(cols()) +
                        " exceeds grid " + std::to_string(grid.rows) + "x" +
                        std::to_string(grid.cols));
    Image out = Image::Zero(grid.rows, grid.cols);
    if (dims_ == Dims::OneD) {
      detail::require(grid.is_1d(), "1D kernel on a 2D grid");
      out.row(0).head(cols()) = values_.row(0);
      return out;
    }
    const Index r0 = rows() / 2, c0 = cols() / 2;
    for (Index i = 0; i < rows(); ++i) {
      const Index gi = ((i - r0) % grid.rows + grid.rows) % grid.rows;
      for (Index j = 0; j < cols(); ++j) {
        const Index gj = ((j - c0) % grid.cols + grid.cols) % grid.cols;
        out(gi, gj) += values_(i, j);
      }
    }
    return out;
  }

 private:
  BlurKernel(Dims dims, Image values) : dims_(dims), values_(std::move(values)) {
    detail::require(values_.size() > 0, "empty kernel");
    detail::require(values_.allFinite(), "kernel has non-finite entries");
    detail::require((values_.array() != 0.0).any(), "kernel is identically zero");
  }

  Dims dims_;
  Image values_;
};

/// Sensor positions: distinct flat indices into the periodic output grid.
class SamplingPattern {
 public:
  /// indices floor(j*L/N), j = 0..N-1, on a 1D grid of length L.
  static SamplingPattern uniform(Index L, Index N) {
    detail::require(L >= 1 && N >= 1 && N <= L, "uniform sampling needs 1 <= N <= L");
    std::vector<Index> idx(static_cast<std::size_t>(N));
    for (Index j = 0; j < N; ++j) idx[static_cast<std::size_t>(j)] = (j * L) / N;
    return SamplingPattern(GridShape{1, L}, std::move(idx), GridShape{1, N});
  }

  /// Every `stride`-th row and column, starting at offset 0 in each axis.
  static SamplingPattern strided(GridShape grid, Index stride) {
    detail::require(stride >= 1 && grid.size() >= 1, "stride must be >= 1");
    const Index nr = (grid.rows + stride - 1) / stride;
    const Index nc = (grid.cols + stride - 1) / stride;
    std::vector<Index> idx;
    idx.reserve(static_cast<std::size_t>(nr * nc));
    for (Index r = 0; r < grid.rows; r += stride)
      for (Index c = 0; c < grid.cols; c += stride) idx.push_back(r * grid.cols + c);
    return SamplingPattern(grid, std::move(idx), GridShape{nr, nc});
  }

  static SamplingPattern from_indices(GridShape grid, std::vector<Index> indices) {
    const auto n = static_cast<Index>(indices.size());
    return SamplingPattern(grid, std::move(indices), GridShape{1, n});
  }

  const std::vector<Index>& indices() const noexcept { return indices_; }
  Index count() const noexcept { return static_cast<Index>(indices_.size()); }
  GridShape grid() const noexcept { return grid_; }
  /// Shape of one mask's measurement block when viewed as an image.
  GridShape layout() const noexcept { return layout_; }

 private:
  SamplingPattern(GridShape grid, std::vector<Index> indices, GridShape layout)
      : grid_(grid), indices_(std::move(indices)), layout_(layout) {
    detail::require(!indices_.empty(), "sampling pattern needs at least one sensor");
    detail::require(count() <= grid_.size(), "more sensors than grid points");
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      detail::require(indices_[i] >= 0 && indices_[i] < grid_.size(),
                      "sampling index out of range");
      if (i > 0) detail::require(indices_[i - 1] < indices_[i], "sampling indices must increase");
    }
  }

  GridShape grid_;
  std::vector<Index> indices_;
  GridShape layout_;
};

}  // namespace maskcs

#endif  // MASKCS_KERNEL_HPP
