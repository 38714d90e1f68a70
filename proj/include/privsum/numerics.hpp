#pragma once

#include <span>

#include <Eigen/Dense>

#include "privsum/error.hpp"
#include "privsum/scalar.hpp"

namespace privsum {

/// Pivots below this fraction of the largest column norm count as zero.
inline constexpr double rank_threshold = 1e-10;

template <typename Scalar>
struct LeastSquares {
  Vector<Scalar> solution;
  Scalar residual_norm{0};
  Eigen::Index rank = 0;
};

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* what) {
  using std::isfinite;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (!isfinite(a(i, j))) throw Error(Errc::non_finite, std::string(what) + " has a non-finite entry");
    }
  }
}

/// Minimum-norm minimiser of |A x - b| through a complete orthogonal
/// decomposition (Householder QR with column pivoting, then a second QR of
/// the leading rows of R).
template <typename DerivedA, typename DerivedB>
auto min_norm_least_squares(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.rows() != b.rows()) throw Error(Errc::dimension_mismatch, "A and b row counts differ");
  require_finite(a, "A");
  require_finite(b, "b");

  LeastSquares<Scalar> out;
  if (a.rows() == 0 || a.cols() == 0) {
    out.solution = Vector<Scalar>::Zero(a.cols());
    out.residual_norm = b.norm();
    return out;
  }
  const Matrix<Scalar> dense = a;
  Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>> cod(dense.rows(), dense.cols());
  // Eigen compares |R_ii| against threshold * max|R_ii|; the first pivot is
  // the largest column norm, so this is the column-norm relative rule.
  cod.setThreshold(Scalar(rank_threshold));
  cod.compute(dense);
  out.solution = cod.solve(b.derived());
  out.residual_norm = (dense * out.solution - b).norm();
  out.rank = cod.rank();
  return out;
}

template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  require_finite(a, "matrix");
  if (a.rows() == 0 || a.cols() == 0) return 0;
  const Matrix<Scalar> dense = a;
  if (dense.cwiseAbs().maxCoeff() == Scalar(0)) return 0;
  Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(dense.rows(), dense.cols());
  qr.setThreshold(Scalar(rank_threshold));
  qr.compute(dense);
  return qr.rank();
}

/// ms[0] * ms[1] * ... * ms[last]; the identity of size `dim` when empty.
template <typename Scalar>
Matrix<Scalar> matrix_product_accumulate(std::span<const Matrix<Scalar>> ms, Eigen::Index dim) {
  Matrix<Scalar> acc = Matrix<Scalar>::Identity(dim, dim);
  for (const auto& m : ms) {
    if (acc.cols() != m.rows()) throw Error(Errc::dimension_mismatch, "non-conformable product");
    acc = (acc * m).eval();
  }
  return acc;
}

}  // namespace privsum
