#pragma once

// Dense types and distance kernels shared by the pipeline. Embedding sets are
// row-major: one embedding per row.

#include <Eigen/Core>

#include <cstdint>

namespace tadil {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXr = RowMatrix<double>;
using VectorXr = Vector<double>;

using TaskId = std::int32_t;

/// 1 - u.v for unit vectors, clamped to [0, 2] so rounding never produces a
/// negative distance.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_distance(const Eigen::MatrixBase<DerivedA>& u,
                                          const Eigen::MatrixBase<DerivedB>& v) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar d = Scalar(1) - u.dot(v);
  return d < Scalar(0) ? Scalar(0) : (d > Scalar(2) ? Scalar(2) : d);
}

/// Full pairwise cosine distance matrix of the rows of X.
template <typename Derived>
RowMatrix<typename Derived::Scalar> pairwise_cosine_distances(const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> D = RowMatrix<Scalar>::Ones(X.rows(), X.rows());
  D.noalias() -= X * X.transpose();
  return D.cwiseMax(Scalar(0)).cwiseMin(Scalar(2));
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar manhattan_distance(const Eigen::MatrixBase<DerivedA>& u,
                                             const Eigen::MatrixBase<DerivedB>& v) {
  return (u - v).cwiseAbs().sum();
}

/// L1 distance from every row of X to `point`.
template <typename DerivedX, typename DerivedP>
Vector<typename DerivedX::Scalar> manhattan_to_rows(const Eigen::MatrixBase<DerivedX>& X,
                                                    const Eigen::MatrixBase<DerivedP>& point) {
  return (X.rowwise() - point.transpose().template cast<typename DerivedX::Scalar>())
      .cwiseAbs()
      .rowwise()
      .sum();
}

/// Squared Euclidean distances between all rows of X, computed per pair as
/// sum((x_i - x_j)^2) so the result is exactly symmetric.
template <typename Derived>
RowMatrix<typename Derived::Scalar> pairwise_squared_euclidean(const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  const Index n = X.rows();
  RowMatrix<Scalar> D = RowMatrix<Scalar>::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const Scalar d = (X.row(i) - X.row(j)).squaredNorm();
      D(i, j) = d;
      D(j, i) = d;
    }
  }
  return D;
}

}  // namespace tadil
