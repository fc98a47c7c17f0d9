#ifndef POSEKIT_LINALG_HPP
#define POSEKIT_LINALG_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "posekit/types.hpp"

namespace posekit {

template <typename Scalar>
struct SvdResultT {
  Mat3T<Scalar> U;
  Vec3T<Scalar> S;  // descending, non-negative
  Mat3T<Scalar> V;
};

using SvdResult = SvdResultT<double>;

namespace detail {

/// Cyclic Jacobi eigen-decomposition of a symmetric 3x3 matrix. On return
/// `a` is (nearly) diagonal and the columns of `v` hold the eigenvectors.
template <typename Scalar>
void jacobi_eigen3(Mat3T<Scalar>& a, Mat3T<Scalar>& v, Scalar tol, int max_sweeps) {
  using std::abs;
  using std::sqrt;
  v.setIdentity();
  const Scalar scale = a.norm();
  if (scale == Scalar(0)) return;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Scalar off = sqrt(a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2));
    if (off <= tol * scale) return;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a(p, q) == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * a(p, q));
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) / (abs(theta) + sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        for (int k = 0; k < 3; ++k) {
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const Scalar apk = a(p, k);
          const Scalar aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const Scalar vkp = v(k, p);
          const Scalar vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
}

/// One-sided (Hestenes) Jacobi: rotates column pairs of `b` until they are
/// mutually orthogonal, accumulating the rotations into `v`.
template <typename Scalar>
void one_sided_jacobi3(Mat3T<Scalar>& b, Mat3T<Scalar>& v, Scalar tol, int max_sweeps) {
  using std::abs;
  using std::sqrt;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const Scalar alpha = b.col(p).squaredNorm();
        const Scalar beta = b.col(q).squaredNorm();
        const Scalar gamma = b.col(p).dot(b.col(q));
        if (gamma == Scalar(0) || abs(gamma) <= tol * sqrt(alpha * beta)) continue;
        rotated = true;
        const Scalar zeta = (beta - alpha) / (Scalar(2) * gamma);
        const Scalar t = (zeta >= 0 ? Scalar(1) : Scalar(-1)) / (abs(zeta) + sqrt(zeta * zeta + Scalar(1)));
        const Scalar c = Scalar(1) / sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        for (int k = 0; k < 3; ++k) {
          const Scalar bkp = b(k, p);
          const Scalar bkq = b(k, q);
          b(k, p) = c * bkp - s * bkq;
          b(k, q) = s * bkp + c * bkq;
          const Scalar vkp = v(k, p);
          const Scalar vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    if (!rotated) return;
  }
}

}  // namespace detail

/// Singular value decomposition of a 3x3 matrix, m = U diag(S) V^T.
///
/// V comes from a Jacobi eigen-decomposition of the Gram matrix m^T m, then
/// one-sided Jacobi sweeps on m V restore full accuracy for the small singular
/// values. Columns for (numerically) zero singular values are completed to an
/// orthonormal basis. Signs are canonical: the largest-magnitude entry of each
/// U column is non-negative and V follows.
template <typename Scalar>
SvdResultT<Scalar> svd3(const Mat3T<Scalar>& m) {
  using std::abs;
  if (!m.allFinite()) throw NumericalError("svd3: input has non-finite entries");

  constexpr Scalar kTol = Scalar(1e-12);
  constexpr int kMaxSweeps = 50;

  Mat3T<Scalar> gram = m.transpose() * m;
  Mat3T<Scalar> v;
  detail::jacobi_eigen3(gram, v, kTol, kMaxSweeps);

  Mat3T<Scalar> b = m * v;
  detail::one_sided_jacobi3(b, v, kTol, kMaxSweeps);

  std::array<int, 3> order{0, 1, 2};
  Vec3T<Scalar> norms(b.col(0).norm(), b.col(1).norm(), b.col(2).norm());
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return norms(i) > norms(j); });

  SvdResultT<Scalar> out;
  Mat3T<Scalar> bs;
  for (int i = 0; i < 3; ++i) {
    out.S(i) = norms(order[i]);
    bs.col(i) = b.col(order[i]);
    out.V.col(i) = v.col(order[i]);
  }

  // Columns whose singular value is lost in round-off are rebuilt from the
  // others rather than normalized from noise.
  const Scalar cutoff = out.S(0) * Scalar(64) * std::numeric_limits<Scalar>::epsilon();
  int rank = 0;
  for (int i = 0; i < 3; ++i) {
    if (out.S(i) > cutoff && out.S(i) > Scalar(0)) ++rank;
  }
  for (int i = 0; i < rank; ++i) {
    Vec3T<Scalar> u = bs.col(i) / out.S(i);
    for (int k = 0; k < i; ++k) u -= u.dot(out.U.col(k)) * out.U.col(k);
    out.U.col(i) = u.normalized();
  }
  if (rank == 0) {
    out.U.setIdentity();
  } else if (rank == 1) {
    const Vec3T<Scalar> u0 = out.U.col(0);
    int axis = 0;
    for (int k = 1; k < 3; ++k) {
      if (abs(u0(k)) < abs(u0(axis))) axis = k;
    }
    Vec3T<Scalar> e = Vec3T<Scalar>::Unit(axis);
    e -= e.dot(u0) * u0;
    out.U.col(1) = e.normalized();
    out.U.col(2) = u0.cross(Vec3T<Scalar>(out.U.col(1)));
  } else if (rank == 2) {
    out.U.col(2) = Vec3T<Scalar>(out.U.col(0)).cross(Vec3T<Scalar>(out.U.col(1)));
  }

  for (int i = 0; i < 3; ++i) {
    int big = 0;
    for (int k = 1; k < 3; ++k) {
      if (abs(out.U(k, i)) > abs(out.U(big, i))) big = k;
    }
    if (out.U(big, i) < Scalar(0)) {
      out.U.col(i) = -out.U.col(i);
      out.V.col(i) = -out.V.col(i);
    }
  }
  return out;
}

/// Per-coordinate step used by finite_difference_gradient.
template <typename Scalar>
Scalar fd_step(Scalar relative_step, Scalar x) {
  using std::abs;
  return relative_step * std::max(Scalar(1), abs(x));
}

/// Central-difference gradient of a scalar function; coordinate i uses the
/// step h * max(1, |x_i|).
template <typename Func, typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> finite_difference_gradient(Func&& f,
                                                                   const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x,
                                                                   Scalar h = Scalar(1e-5)) {
  using std::isfinite;
  if (!(h > Scalar(0))) throw UsageError("finite_difference_gradient: step must be positive");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> grad(x.size());
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Scalar step = fd_step(h, x(i));
    probe(i) = x(i) + step;
    const Scalar plus = f(probe);
    probe(i) = x(i) - step;
    const Scalar minus = f(probe);
    probe(i) = x(i);
    if (!isfinite(plus) || !isfinite(minus)) {
      throw NumericalError("finite_difference_gradient: non-finite evaluation at coordinate " + std::to_string(i));
    }
    grad(i) = (plus - minus) / (Scalar(2) * step);
  }
  return grad;
}

/// Rotation about a unit axis by `angle` radians.
template <typename Scalar>
Mat3T<Scalar> axis_angle(const Vec3T<Scalar>& axis, Scalar angle) {
  return Eigen::AngleAxis<Scalar>(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace posekit

#endif  // POSEKIT_LINALG_HPP
