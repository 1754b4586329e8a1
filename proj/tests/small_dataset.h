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

// A four-track, eight-clip corpus that precomputes in a few seconds. Every
// track lands in the training split.

#ifndef REGIONSEP_TESTS_SMALL_DATASET_H_
#define REGIONSEP_TESTS_SMALL_DATASET_H_

#include <filesystem>
#include <string>

#include "regionsep/config.h"
#include "regionsep/pipeline.h"

namespace fixtures {

inline regionsep::PipelineConfig SmallConfig(uint64_t seed = 3) {
  return regionsep::ParseConfig(R"({
    "seed": )" + std::to_string(seed) + R"(,
    "data": {"num_tracks": 4, "track_seconds": 11, "min_stems": 3, "max_stems": 5},
    "splits": {"train": 1.0, "validation": 0.0, "test": 0.0},
    "model": {"bands": 4, "film_hidden": 16, "dec_hidden": 8},
    "train": {"epochs": 1, "batches_per_epoch": 2, "batch_size": 1, "val_queries": 2}
  })");
}

// Generates and precomputes the corpus under `dir` (replacing it); returns
// the manifest path.
inline std::filesystem::path BuildSmallDataset(const std::filesystem::path& dir,
                                               uint64_t seed = 3) {
  std::filesystem::remove_all(dir);
  const regionsep::PipelineConfig cfg = SmallConfig(seed);
  regionsep::generate_dataset(cfg, dir);
  const auto manifest = dir / regionsep::kManifestName;
  regionsep::precompute_dataset(cfg, manifest);
  return manifest;
}

}  // namespace fixtures

#endif  // REGIONSEP_TESTS_SMALL_DATASET_H_
