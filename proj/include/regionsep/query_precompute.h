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

// Precomputation of valid region queries for a clip.
//
// For every target subset of the available stems, an enclosing ellipsoid is fit
// to the target embeddings and a concentric, co-axial excluding ellipsoid is
// grown toward the nearest non-target. Any radii between the two select the
// same target from the same mixture.

#ifndef REGIONSEP_QUERY_PRECOMPUTE_H_
#define REGIONSEP_QUERY_PRECOMPUTE_H_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regionsep/query_geometry.h"
#include "regionsep/signal.h"

namespace regionsep {

struct PrecomputeConfig {
  double level_gate_db = -48.0;
  double delta = 1e-4;
  double eps = kDefaultAxisCutoff;
  int max_subset_card = 10;
  int max_specs_per_clip = 1024;
  double no_nontarget_ratio = 4.0;
  // Non-targets whose distance to the excluding ellipsoid falls below
  // 1 - catch_margin are treated as inside and dropped from the mixture.
  double catch_margin = 1e-9;

  void Validate() const;
};

struct QuerySpec {
  std::string clip_id;
  Eigen::VectorXd center;
  Eigen::MatrixXd axes;
  Eigen::VectorXd inclusion_radii;
  Eigen::VectorXd exclusion_radii;
  // Indices into the clip's stem list.
  std::vector<int> targets;
  std::vector<int> non_targets;
  std::vector<int> eliminated;

  Eigen::Index dim() const { return center.size(); }
  // Stems that make up the input mixture: targets and non-targets, sorted.
  std::vector<int> MixtureIndices() const;

  Ellipsoid Inner() const { return {center, axes, inclusion_radii}; }
  Ellipsoid Outer() const { return {center, axes, exclusion_radii}; }
  Ellipsoid At(double t) const;

  bool operator==(const QuerySpec&) const = default;
};

// Indices of stems at or above the gate.
std::vector<int> available_sources(const std::vector<SampleMatrix>& stems,
                                   double gate_db);

struct EnclosingEllipsoid {
  Eigen::VectorXd center;
  Eigen::MatrixXd axes;
  Eigen::VectorXd eigenvalues;  // of K, i.e. squared radii
  Eigen::VectorXd radii;
  Eigen::MatrixXd covariance;   // population covariance of the points
  double kappa = 1.0;

  Ellipsoid AsEllipsoid() const { return {center, axes, radii}; }
};

// Rows of `points` are embeddings. A single point yields K = delta I.
EnclosingEllipsoid enclosing_ellipsoid(const Eigen::MatrixXd& points,
                                       double delta,
                                       double eps = kDefaultAxisCutoff);

struct ExcludingRadii {
  Eigen::VectorXd radii;
  Eigen::VectorXd eigenvalues;
  // Rows of the input still inside the excluding ellipsoid.
  std::vector<int> caught;
  double kappa = 0.0;
};

// Rows of `non_targets` are non-target embeddings; may be empty.
ExcludingRadii excluding_radii(const Eigen::MatrixXd& non_targets,
                               const Eigen::VectorXd& center,
                               const Eigen::MatrixXd& axes,
                               const Eigen::VectorXd& inclusion_eigenvalues,
                               const PrecomputeConfig& cfg);

// Enumerates target subsets of the available stems in increasing bitmask
// order. `embeddings` has one row per stem of the clip (rows of unavailable
// stems are ignored).
std::vector<QuerySpec> precompute_clip(const std::string& clip_id,
                                       const std::vector<int>& available,
                                       const Eigen::MatrixXd& embeddings,
                                       const PrecomputeConfig& cfg);

std::vector<QuerySpec> precompute_clip(const std::string& clip_id,
                                       const std::vector<SampleMatrix>& stems,
                                       const Eigen::MatrixXd& embeddings,
                                       const PrecomputeConfig& cfg);

// Radii drawn independently and uniformly between inclusion and exclusion.
Ellipsoid sample_training_query(const QuerySpec& spec, std::mt19937_64& rng);
Ellipsoid validation_query(const QuerySpec& spec);
// Requires a single target and alpha in [1e-3, 1].
Ellipsoid single_source_query(const QuerySpec& spec, double alpha);

inline const std::vector<double>& DefaultAlphaGrid() {
  static const std::vector<double> grid = {0.001, 0.0025, 0.005, 0.01, 0.025,
                                           0.05,  0.1,    0.25,  0.5,  1.0};
  return grid;
}

// Uniform double in [0, 1) from the top 53 bits of the engine output.
inline double Uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller on Uniform01; unlike std::normal_distribution the sequence does
// not depend on the standard library implementation.
inline double StandardNormal(std::mt19937_64& rng) {
  const double u1 = 1.0 - Uniform01(rng);
  const double u2 = Uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Binary spec store. Layout (little-endian):
//   magic "RSQSPEC" (7 bytes), version byte, uint32 record count, then per
//   record: uint32 clip_id length + bytes, uint32 D, D doubles center, D*D
//   doubles axes (row-major), D doubles inclusion radii, D doubles exclusion
//   radii, and three uint32-counted lists of uint32 indices (targets,
//   non-targets, eliminated).
inline constexpr char kSpecMagic[7] = {'R', 'S', 'Q', 'S', 'P', 'E', 'C'};
inline constexpr uint8_t kSpecVersion = 1;

std::string EncodeSpecs(const std::vector<QuerySpec>& specs);
std::vector<QuerySpec> DecodeSpecs(const std::string& bytes);
void WriteSpecs(const std::filesystem::path& path,
                const std::vector<QuerySpec>& specs);
std::vector<QuerySpec> ReadSpecs(const std::filesystem::path& path);
// One human-readable line per record.
std::string SpecSummary(const std::vector<QuerySpec>& specs);

}  // namespace regionsep

#endif  // REGIONSEP_QUERY_PRECOMPUTE_H_
