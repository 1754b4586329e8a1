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

// Randomized inputs shared by the unit tests and the acceptance runner.

#ifndef REGIONSEP_TESTS_FIXTURES_H_
#define REGIONSEP_TESTS_FIXTURES_H_

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "regionsep/query_precompute.h"

namespace fixtures {

struct SpecCase {
  Eigen::MatrixXd embeddings;  // rows = stems
  regionsep::QuerySpec spec;
};

// Random clips in D dimensions with 2..8 stems. Every third clip draws its
// points around a few tight clusters, so near-coincident stems and
// eliminated non-targets occur regularly.
inline Eigen::MatrixXd RandomEmbeddings(int n, int d, std::mt19937_64& rng, bool clustered) {
  std::normal_distribution<double> nd(0, 1);
  Eigen::MatrixXd e(n, d);
  if (!clustered) {
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = nd(rng);
    return e;
  }
  Eigen::MatrixXd centers(3, d);
  for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = nd(rng);
  for (int i = 0; i < n; ++i) {
    e.row(i) = centers.row(rng() % 3);
    for (int k = 0; k < d; ++k) e(i, k) += 1e-3 * nd(rng);
  }
  return e;
}

// `count` specs drawn from random clips with D cycling through `dims`.
inline std::vector<SpecCase> RandomSpecs(int count, const std::vector<int>& dims,
                                          uint64_t seed) {
  std::mt19937_64 rng(seed);
  regionsep::PrecomputeConfig cfg;
  std::vector<SpecCase> out;
  int clip = 0;
  while (static_cast<int>(out.size()) < count) {
    const int d = dims[clip % dims.size()];
    const int n = 2 + static_cast<int>(rng() % 7);
    const Eigen::MatrixXd e = RandomEmbeddings(n, d, rng, clip % 3 == 2);
    std::vector<int> available(n);
    for (int i = 0; i < n; ++i) available[i] = i;
    const auto specs = regionsep::precompute_clip("clip" + std::to_string(clip), available, e, cfg);
    // A few specs per clip keeps the sample diverse.
    for (int k = 0; k < 4 && !specs.empty() && static_cast<int>(out.size()) < count; ++k) {
      out.push_back({e, specs[rng() % specs.size()]});
    }
    ++clip;
  }
  return out;
}

}  // namespace fixtures

#endif  // REGIONSEP_TESTS_FIXTURES_H_
