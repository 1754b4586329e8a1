/*
 * Copyright 2026 The regionsep Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Hyperellipsoidal regions of the query space.
//
// A region is {z : (z - c)^T K^+ (z - c) <= 1} with K = P diag(r)^2 P^T. The
// pseudo-inverse drops every axis whose semi-axis length falls below a cutoff,
// so a degenerate axis constrains nothing.

#ifndef REGIONSEP_QUERY_GEOMETRY_H_
#define REGIONSEP_QUERY_GEOMETRY_H_

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace regionsep {

inline constexpr double kDefaultAxisCutoff = 1e-6;
inline constexpr double kOrthonormalTolerance = 1e-8;

template <typename Scalar>
struct Hyperellipsoid {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector center;
  Matrix axes;  // columns are the principal axes
  Vector radii;

  Hyperellipsoid() = default;
  Hyperellipsoid(Vector c, Matrix p, Vector r)
      : center(std::move(c)), axes(std::move(p)), radii(std::move(r)) {}

  static Hyperellipsoid Ball(const Vector& c, Scalar radius) {
    const Eigen::Index d = c.size();
    return Hyperellipsoid(c, Matrix::Identity(d, d), Vector::Constant(d, radius));
  }

  Eigen::Index dim() const { return center.size(); }

  // K = P diag(r)^2 P^T.
  Matrix ShapeMatrix() const {
    return axes * radii.array().square().matrix().asDiagonal() *
           axes.transpose();
  }

  void Validate(double tolerance = kOrthonormalTolerance) const {
    const Eigen::Index d = center.size();
    if (axes.rows() != d || axes.cols() != d || radii.size() != d) {
      throw std::invalid_argument("hyperellipsoid: inconsistent dimensions");
    }
    if (!center.allFinite() || !radii.allFinite() ||
        (radii.array() < Scalar(0)).any()) {
      throw std::invalid_argument(
          "hyperellipsoid: radii must be finite and non-negative");
    }
    const Matrix gram = axes.transpose() * axes;
    const Scalar err = (gram - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
    if (!(err <= Scalar(tolerance))) {
      throw std::invalid_argument("hyperellipsoid: axes are not orthonormal");
    }
  }
};

using Ellipsoid = Hyperellipsoid<double>;

// (z - c)^T K^+ (z - c) where axis i contributes only if r_i >= eps.
template <typename Scalar, typename Derived>
Scalar mahalanobis(const Eigen::MatrixBase<Derived>& z,
                   const Hyperellipsoid<Scalar>& e,
                   Scalar eps = Scalar(kDefaultAxisCutoff)) {
  if (!(eps > Scalar(0))) {
    throw std::invalid_argument("mahalanobis: eps must be positive");
  }
  if (z.size() != e.dim()) {
    throw std::invalid_argument("mahalanobis: dimension mismatch (" +
                                std::to_string(z.size()) + " vs " +
                                std::to_string(e.dim()) + ")");
  }
  e.Validate();
  const typename Hyperellipsoid<Scalar>::Vector local =
      e.axes.transpose() * (z.derived() - e.center);
  Scalar d = 0;
  for (Eigen::Index i = 0; i < local.size(); ++i) {
    if (e.radii[i] >= eps) d += (local[i] / e.radii[i]) * (local[i] / e.radii[i]);
  }
  return d;
}

template <typename Scalar, typename Derived>
bool contains(const Hyperellipsoid<Scalar>& e,
              const Eigen::MatrixBase<Derived>& z,
              Scalar eps = Scalar(kDefaultAxisCutoff)) {
  return mahalanobis(z, e, eps) <= Scalar(1);
}

// Number of entries of the vectorized query for a D-dimensional space.
constexpr Eigen::Index QueryVectorSize(Eigen::Index d) {
  return d * (d + 3) / 2;
}

// [c; tril(K)] with the lower triangle (diagonal included) read row by row:
// K00, K10, K11, K20, K21, K22, ...
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> to_query_vector(
    const Hyperellipsoid<Scalar>& e) {
  const Eigen::Index d = e.dim();
  const auto k = e.ShapeMatrix();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> q(QueryVectorSize(d));
  q.head(d) = e.center;
  Eigen::Index pos = d;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) q[pos++] = k(i, j);
  }
  return q;
}

// Inverse of the triangle packing: the symmetric K stored in q.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> ShapeFromQueryVector(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& q, Eigen::Index d) {
  if (q.size() != QueryVectorSize(d)) {
    throw std::invalid_argument("query vector length does not match D");
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> k(d, d);
  Eigen::Index pos = d;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = q[pos];
      k(j, i) = q[pos];
      ++pos;
    }
  }
  return k;
}

// r + t (r_perp - r), elementwise.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> interpolate(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& inner,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& outer, Scalar t) {
  if (inner.size() != outer.size()) {
    throw std::invalid_argument("interpolate: dimension mismatch");
  }
  if ((inner.array() > outer.array()).any()) {
    throw std::invalid_argument(
        "interpolate: inclusion radius exceeds exclusion radius");
  }
  if (!(t >= Scalar(0) && t <= Scalar(1))) {
    throw std::invalid_argument("interpolate: t must lie in [0, 1]");
  }
  return inner + t * (outer - inner);
}

// Image of the region under z -> R z + b.
template <typename Scalar>
Hyperellipsoid<Scalar> rotate(
    const Hyperellipsoid<Scalar>& e,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& rotation,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& offset) {
  return Hyperellipsoid<Scalar>(rotation * e.center + offset,
                                rotation * e.axes, e.radii);
}

}  // namespace regionsep

#endif  // REGIONSEP_QUERY_GEOMETRY_H_
