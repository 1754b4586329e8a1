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

// Independent reference implementations shared by the unit tests and the
// acceptance runner. None of them call into the code under test.

#ifndef REGIONSEP_TESTS_ORACLES_H_
#define REGIONSEP_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// AP as the sum over distinct thresholds (descending) of
// (recall step) * precision, predicting positive for score >= threshold.
inline std::optional<double> AveragePrecision(const std::vector<double>& scores,
                                              const std::vector<int>& truth) {
  int positives = 0;
  for (int t : truth) positives += t;
  if (positives == 0) return std::nullopt;
  std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
  double ap = 0, prev_recall = 0;
  for (double th : thresholds) {
    int tp = 0, predicted = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= th) {
        ++predicted;
        tp += truth[i];
      }
    }
    const double recall = static_cast<double>(tp) / positives;
    ap += (recall - prev_recall) * static_cast<double>(tp) / predicted;
    prev_recall = recall;
  }
  return ap;
}

// Probability that a random positive outscores a random negative, ties
// counting one half.
inline std::optional<double> RocAuc(const std::vector<double>& scores,
                                    const std::vector<int>& truth) {
  double wins = 0;
  long pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!truth[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (truth[j]) continue;
      ++pairs;
      wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  }
  if (pairs == 0) return std::nullopt;
  return wins / static_cast<double>(pairs);
}

// Ridge least squares through the normal equations in long double:
// (A^T A + ridge I) x = A^T b with A's columns the flattened sources.
inline Eigen::VectorXd NormalEquations(const std::vector<Eigen::VectorXd>& sources,
                                       const Eigen::VectorXd& target, double ridge) {
  using Ld = long double;
  const auto n = static_cast<Eigen::Index>(sources.size());
  Eigen::Matrix<Ld, Eigen::Dynamic, Eigen::Dynamic> g(n, n);
  Eigen::Matrix<Ld, Eigen::Dynamic, 1> b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b[i] = 0;
    for (Eigen::Index k = 0; k < target.size(); ++k) {
      b[i] += static_cast<Ld>(sources[i][k]) * static_cast<Ld>(target[k]);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      Ld s = 0;
      for (Eigen::Index k = 0; k < target.size(); ++k) {
        s += static_cast<Ld>(sources[i][k]) * static_cast<Ld>(sources[j][k]);
      }
      g(i, j) = s + (i == j ? static_cast<Ld>(ridge) : Ld(0));
    }
  }
  // Gaussian elimination with partial pivoting.
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index p = c;
    for (Eigen::Index r = c + 1; r < n; ++r) {
      if (std::fabs(g(r, c)) > std::fabs(g(p, c))) p = r;
    }
    g.row(c).swap(g.row(p));
    std::swap(b[c], b[p]);
    for (Eigen::Index r = c + 1; r < n; ++r) {
      const Ld f = g(r, c) / g(c, c);
      g.row(r) -= f * g.row(c);
      b[r] -= f * b[c];
    }
  }
  Eigen::VectorXd x(n);
  for (Eigen::Index c = n - 1; c >= 0; --c) {
    Ld s = b[c];
    for (Eigen::Index j = c + 1; j < n; ++j) s -= g(c, j) * static_cast<Ld>(x[j]);
    x[c] = static_cast<double>(s / g(c, c));
  }
  return x;
}

// Central difference of f along coordinate i of x.
inline double CentralDifference(const std::function<double(const Eigen::VectorXd&)>& f,
                                Eigen::VectorXd x, Eigen::Index i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2 * h);
}

inline double RelativeError(double a, double b, double floor = 1e-8) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

// z^T (P diag(r)^2 P^T)^+ z by explicit pseudo-inverse, dropping axes with
// r < eps. Long double: radii near eps make the dense inverse ill-scaled.
inline double Mahalanobis(const Eigen::VectorXd& z, const Eigen::VectorXd& c,
                          const Eigen::MatrixXd& axes, const Eigen::VectorXd& r,
                          double eps = 1e-6) {
  using Mat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const Mat p = axes.cast<long double>();
  Mat pinv = Mat::Zero(c.size(), c.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (r[i] >= eps) {
      const long double ri = r[i];
      pinv += p.col(i) * p.col(i).transpose() / (ri * ri);
    }
  }
  const Vec d = (z - c).cast<long double>();
  return static_cast<double>(d.dot(pinv * d));
}

inline Eigen::MatrixXd RandomRotation(Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace oracle

#endif  // REGIONSEP_TESTS_ORACLES_H_
