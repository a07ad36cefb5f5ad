#pragma once

#include <Eigen/Core>

#include <array>
#include <string>

#include "nmtprobe/random.hpp"

namespace nmtprobe {

/// Dense row-major matrix. Every value in the toolkit is rank 2: vectors are
/// 1xN rows, scalars are 1x1, and a batch of B vectors is BxN.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic, Eigen::RowMajor>;

using Tensor = Matrix<double>;
using Index = Eigen::Index;

inline std::array<Index, 2> shape_of(const Tensor& t) { return {t.rows(), t.cols()}; }

inline std::string shape_string(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// Fills with independent draws from U[lo, hi).
template <typename Scalar>
void fill_uniform(Matrix<Scalar>& m, Rng& rng, Scalar lo, Scalar hi) {
  for (Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<Scalar>(rng.uniform(lo, hi));
  }
}

template <typename Scalar>
Matrix<Scalar> uniform_matrix(Index rows, Index cols, Rng& rng, Scalar range) {
  Matrix<Scalar> m(rows, cols);
  fill_uniform<Scalar>(m, rng, -range, range);
  return m;
}

/// Index of the largest entry of a row; ties go to the lowest index.
template <typename Derived>
Index argmax_row(const Eigen::DenseBase<Derived>& row) {
  Index best = 0;
  for (Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = j;
  }
  return best;
}

}  // namespace nmtprobe
