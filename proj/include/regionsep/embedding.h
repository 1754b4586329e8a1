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

#ifndef REGIONSEP_EMBEDDING_H_
#define REGIONSEP_EMBEDDING_H_

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regionsep/signal.h"

namespace regionsep {

struct EmbeddingSet {
  Eigen::MatrixXd vectors;  // n x P, one row per source
  std::vector<std::string> source_ids;

  Eigen::Index size() const { return vectors.rows(); }
  Eigen::Index space_dim() const { return vectors.cols(); }

  // Throws on non-finite rows, duplicate ids or a row/id count mismatch.
  void Validate() const;
};

struct MockEmbedderConfig {
  int dim = 24;
  double min_seconds = 0.5;
  StftConfig stft;
};

// Deterministic stand-in for a pretrained audio embedder: log energies of
// mel-spaced bands of the time-averaged magnitude spectrum, mean-removed and
// L2-normalized. Gain-invariant by construction; silence maps to zero.
class MockEmbedder {
 public:
  MockEmbedder(const MockEmbedderConfig& cfg, int sample_rate);

  Eigen::VectorXd operator()(const AudioChunk& audio) const;

  const MockEmbedderConfig& config() const { return cfg_; }
  // P x F triangular mel filterbank.
  const Eigen::MatrixXd& filterbank() const { return filterbank_; }

 private:
  MockEmbedderConfig cfg_;
  int sample_rate_;
  Stft stft_;
  Eigen::MatrixXd filterbank_;
};

Eigen::VectorXd mock_embed(const AudioChunk& audio,
                           const MockEmbedderConfig& cfg);

template <typename Scalar>
struct PcaModel {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector mean;        // P
  Matrix components;  // D x P, orthonormal rows
  Vector eigenvalues; // D, nonincreasing
  Scalar total_variance = 0;

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index output_dim() const { return components.rows(); }

  Scalar ExplainedVarianceRatio() const {
    return total_variance > 0 ? eigenvalues.sum() / total_variance : Scalar(1);
  }

  template <typename Derived>
  Vector Project(const Eigen::MatrixBase<Derived>& z) const {
    if (z.size() != input_dim()) {
      throw std::invalid_argument("pca project: dimension mismatch (" +
                                  std::to_string(z.size()) + " vs " +
                                  std::to_string(input_dim()) + ")");
    }
    return components * (z.derived() - mean);
  }

  // Row-wise projection of an n x P matrix.
  Matrix ProjectRows(const Matrix& rows) const {
    if (rows.cols() != input_dim()) {
      throw std::invalid_argument("pca project: dimension mismatch");
    }
    return (rows.rowwise() - mean.transpose()) * components.transpose();
  }

  template <typename Derived>
  Vector Reconstruct(const Eigen::MatrixBase<Derived>& y) const {
    return mean + components.transpose() * y.derived();
  }
};

// Top-D principal components of the (n - 1)-normalized sample covariance.
// Each component's largest-magnitude entry is made positive.
template <typename Scalar>
PcaModel<Scalar> fit_pca(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& data,
    Eigen::Index d) {
  using Matrix = typename PcaModel<Scalar>::Matrix;
  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.cols();
  if (n < 2) throw std::invalid_argument("fit_pca: need at least two rows");
  if (d < 1 || d > std::min(n - 1, p)) {
    throw std::invalid_argument("fit_pca: D must satisfy 1 <= D <= min(n-1, P)");
  }
  if (!data.allFinite()) throw std::invalid_argument("fit_pca: non-finite data");

  PcaModel<Scalar> model;
  model.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - model.mean.transpose();
  const Matrix cov = centered.transpose() * centered / Scalar(n - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("fit_pca: eigendecomposition failed");
  }
  // Eigen returns ascending eigenvalues.
  model.components.resize(d, p);
  model.eigenvalues.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::Index src = p - 1 - i;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v = eig.eigenvectors().col(src);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    model.components.row(i) = v.transpose();
    model.eigenvalues[i] = std::max(eig.eigenvalues()[src], Scalar(0));
  }
  model.total_variance = cov.trace();
  return model;
}

using Pca = PcaModel<double>;

// Line-delimited JSON: one {"stem_id", "P", "values"} record per line.
EmbeddingSet import_embeddings(const std::filesystem::path& path);
void export_embeddings(const std::filesystem::path& path,
                       const EmbeddingSet& set);

void SavePca(const std::filesystem::path& path, const Pca& model);
Pca LoadPca(const std::filesystem::path& path);

}  // namespace regionsep

#endif  // REGIONSEP_EMBEDDING_H_
