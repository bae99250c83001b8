#pragma once

// Closed-form eigendecomposition of symmetric 3x3 matrices.
//
// The characteristic cubic is solved trigonometrically and the roots are
// polished with one Newton step. The eigenvector of the best-separated root
// comes from cross products of rows of (A - lambda I); the remaining pair is
// resolved exactly as a 2x2 problem in the orthogonal plane, which keeps
// near-degenerate pairs stable.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "gliaseg/error.hpp"

namespace gliaseg {

template <typename Scalar>
struct SymmetricEigen3 {
  /// Ordered by increasing magnitude: |values[0]| <= |values[1]| <= |values[2]|.
  Eigen::Matrix<Scalar, 3, 1> values;
  /// Column i is the unit eigenvector of values[i].
  Eigen::Matrix<Scalar, 3, 3> vectors;
};

namespace detail {

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> any_orthogonal(const Eigen::Matrix<Scalar, 3, 1>& v) {
  // Cross with the axis least aligned with v.
  Eigen::Index axis;
  v.cwiseAbs().minCoeff(&axis);
  Eigen::Matrix<Scalar, 3, 1> e = Eigen::Matrix<Scalar, 3, 1>::Zero();
  e[axis] = Scalar(1);
  return v.cross(e).normalized();
}

// Unit null vector of a (numerically) rank-2 symmetric matrix.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> null_vector(const Eigen::Matrix<Scalar, 3, 3>& m) {
  const Eigen::Matrix<Scalar, 3, 1> r0 = m.row(0).transpose(), r1 = m.row(1).transpose(),
                                    r2 = m.row(2).transpose();
  const std::array<Eigen::Matrix<Scalar, 3, 1>, 3> c{r0.cross(r1), r0.cross(r2), r1.cross(r2)};
  std::size_t best = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (c[i].squaredNorm() > c[best].squaredNorm()) best = i;
  if (c[best].squaredNorm() > Scalar(0)) return c[best].normalized();

  // Rank <= 1: everything orthogonal to the largest-pivot column works.
  Eigen::Index col;
  m.colwise().squaredNorm().maxCoeff(&col);
  const Eigen::Matrix<Scalar, 3, 1> pivot = m.col(col);
  if (pivot.squaredNorm() == Scalar(0)) return Eigen::Matrix<Scalar, 3, 1>::UnitX();
  return any_orthogonal<Scalar>(pivot);
}

template <typename Scalar>
void apply_sign_convention(Eigen::Matrix<Scalar, 3, 1>& v) {
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < 3; ++i)
    if (std::abs(v[i]) > std::abs(v[k])) k = i;  // strict: ties keep the first axis
  if (v[k] < Scalar(0)) v = -v;
}

}  // namespace detail

template <typename Scalar>
SymmetricEigen3<Scalar> eigen_symmetric3(const Eigen::Matrix<Scalar, 3, 3>& input) {
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  if (!input.allFinite()) throw NumericError("eigen_symmetric3: non-finite matrix entry");

  SymmetricEigen3<Scalar> out;
  const Mat3 sym = Scalar(0.5) * (input + input.transpose());
  const Scalar scale = sym.cwiseAbs().maxCoeff();
  if (scale == Scalar(0)) {
    out.values.setZero();
    out.vectors.setIdentity();
    return out;
  }

  // Work on the scaled, trace-free matrix to avoid overflow and cancellation.
  const Mat3 a = sym / scale;
  const Scalar shift = a.trace() / Scalar(3);
  const Mat3 b = a - shift * Mat3::Identity();
  const Scalar p = std::sqrt(b.squaredNorm() / Scalar(6));

  Vec3 mu;            // eigenvalues of b
  Mat3 vecs;          // matching eigenvectors
  if (p <= std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), std::abs(shift))) {
    mu.setZero();
    vecs.setIdentity();
  } else {
    const Scalar half_det = std::clamp((b / p).determinant() / Scalar(2), Scalar(-1), Scalar(1));
    const Scalar angle = std::acos(half_det) / Scalar(3);
    const Scalar two_pi_3 = Scalar(2) * std::numbers::pi_v<Scalar> / Scalar(3);
    Scalar hi = Scalar(2) * p * std::cos(angle);
    Scalar lo = Scalar(2) * p * std::cos(angle + two_pi_3);

    // Newton polish on det(b - x I) = -x^3 + c1 x + c0 (trace-free cubic).
    const Scalar c1 = b.squaredNorm() / Scalar(2);
    const Scalar c0 = b.determinant();
    auto polish = [&](Scalar x) {
      const Scalar f = -x * x * x + c1 * x + c0;
      const Scalar df = Scalar(-3) * x * x + c1;
      if (df == Scalar(0)) return x;
      const Scalar y = x - f / df;
      const Scalar fy = -y * y * y + c1 * y + c0;
      return std::abs(fy) < std::abs(f) ? y : x;
    };
    hi = polish(hi);
    lo = polish(lo);
    const Scalar mid = -hi - lo;

    // The root furthest from its neighbour is well conditioned.
    const Scalar isolated = (hi - mid) >= (mid - lo) ? hi : lo;
    const Vec3 v0 = detail::null_vector<Scalar>(b - isolated * Mat3::Identity());

    const Vec3 u = detail::any_orthogonal<Scalar>(v0);
    const Vec3 w = v0.cross(u).normalized();
    const Scalar m00 = u.dot(b * u), m11 = w.dot(b * w), m01 = u.dot(b * w);
    const Scalar theta = Scalar(0.5) * std::atan2(Scalar(2) * m01, m00 - m11);
    const Scalar c = std::cos(theta), s = std::sin(theta);
    const Vec3 v1 = c * u + s * w;
    const Vec3 v2 = -s * u + c * w;

    vecs.col(0) = v0;
    vecs.col(1) = v1;
    vecs.col(2) = v2;
    for (int i = 0; i < 3; ++i) mu[i] = vecs.col(i).dot(b * vecs.col(i));
  }

  std::array<int, 3> order{0, 1, 2};
  Vec3 lambda = (mu.array() + shift).matrix() * scale;
  std::stable_sort(order.begin(), order.end(),
                   [&](int l, int r) { return std::abs(lambda[l]) < std::abs(lambda[r]); });
  for (int i = 0; i < 3; ++i) {
    out.values[i] = lambda[order[i]];
    Vec3 v = vecs.col(order[i]);
    detail::apply_sign_convention<Scalar>(v);
    out.vectors.col(i) = v;
  }
  return out;
}

}  // namespace gliaseg
