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

// Pipeline configuration, read from JSON. Every section and key is optional;
// unknown keys are rejected.
//
//   {
//     "seed": 0,
//     "data":       {"num_tracks": 24, "track_seconds": 30, ...},
//     "chunking":   {"window_seconds": 10, "stride_seconds": 1},
//     "splits":     {"train": 0.7, "validation": 0.15, "test": 0.15},
//     "stft":       {"fft_size": 1024, "hop": 256, "window": "hann"},
//     "embedding":  {"dim": 24, "min_seconds": 0.5, "pca_dim": 8},
//     "precompute": {"level_gate_db": -48, "delta": 1e-4, ...},
//     "model":      {"bands": 8, "film_hidden": 64, "dec_hidden": 32, ...},
//     "loss":       {"eps": 1e-3, "lambda0": 0.01, ...},
//     "train":      {"lr": 1e-3, "batches_per_epoch": 256, "epochs": 10, ...},
//     "eval":       {"threshold": 0.5, "ridge": 1e-8, "alpha_grid": [...], ...}
//   }

#ifndef REGIONSEP_CONFIG_H_
#define REGIONSEP_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "regionsep/dataset.h"
#include "regionsep/embedding.h"
#include "regionsep/loss.h"
#include "regionsep/query_precompute.h"
#include "regionsep/separator.h"
#include "regionsep/training.h"

namespace regionsep {

struct EvalConfig {
  double threshold = 0.5;
  double ridge = 1e-8;
  std::vector<double> alpha_grid = DefaultAlphaGrid();
  // 0 evaluates every spec of a clip; otherwise an evenly spaced subset.
  int max_queries_per_clip = 0;
  // Evaluate every k-th clip of each track.
  int clip_stride = 1;
  // Interpolation parameter of multi-source queries (0.5 = midpoint).
  double t = 0.5;

  void Validate() const;
};

struct PipelineConfig {
  uint64_t seed = 0;
  SynthConfig data;
  double window_seconds = 10.0;
  double stride_seconds = 1.0;
  SplitRatios splits;
  StftConfig stft;
  MockEmbedderConfig embedding;
  int pca_dim = 8;
  PrecomputeConfig precompute;
  SeparatorDims model;
  LossConfig loss;
  TrainConfig train;
  EvalConfig eval;

  // Cross-section consistency (shared STFT, D = pca_dim, rates).
  void Validate() const;
};

PipelineConfig ParseConfig(const std::string& json_text);
PipelineConfig LoadConfig(const std::filesystem::path& path);
// Full configuration with every key, as pretty-printed JSON.
std::string ConfigToJson(const PipelineConfig& cfg);

}  // namespace regionsep

#endif  // REGIONSEP_CONFIG_H_
