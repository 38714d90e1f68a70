#pragma once

#include <cmath>

#include <Eigen/Dense>
#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/float128.hpp>
#include <quadmath.h>

namespace privsum {

/// Quad precision. The perturbed rounds blow states up by roughly three
/// orders of magnitude per round, so conservation checks at 1e-9 of the
/// initial mass need more than 53 mantissa bits once K >= 2.
using quad = boost::multiprecision::float128;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
double to_double(const Scalar& v) {
  return static_cast<double>(v);
}

template <typename Scalar>
Scalar abs_of(const Scalar& v) {
  using std::abs;
  return abs(v);
}

inline double log1p_of(double v) { return std::log1p(v); }
// The boost wrapper's own log1p does not compile for float128.
inline quad log1p_of(const quad& v) { return quad(::log1pq(v.backend().value())); }

}  // namespace privsum
