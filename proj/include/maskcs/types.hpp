#ifndef MASKCS_TYPES_HPP
#define MASKCS_TYPES_HPP

#include <Eigen/Core>

namespace maskcs {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Images and kernels are row-major so that their flat storage matches the
/// signal ordering used by every operator (index = row * cols + col).
using Image = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Shape of the periodic grid a signal lives on. 1D signals use rows == 1.
struct GridShape {
  Index rows = 1;
  Index cols = 1;

  constexpr Index size() const noexcept { return rows * cols; }
  constexpr bool is_1d() const noexcept { return rows == 1; }
  friend constexpr bool operator==(const GridShape&, const GridShape&) = default;
};

}  // namespace maskcs

#endif  // MASKCS_TYPES_HPP
