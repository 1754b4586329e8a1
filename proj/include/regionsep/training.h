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

#ifndef REGIONSEP_TRAINING_H_
#define REGIONSEP_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regionsep/loss.h"
#include "regionsep/query_precompute.h"
#include "regionsep/separator.h"

namespace regionsep {

struct TrainConfig {
  double lr = 1e-3;
  double lr_decay_per_epoch = 0.98;
  int batch_size = 4;
  int batches_per_epoch = 256;
  int epochs = 10;
  double chunk_seconds = 10.0;
  uint64_t seed = 0;

  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  bool augment = true;
  double gain_db_range = 6.0;  // per-stem gain uniform in [-range, +range] dB
  double swap_probability = 0.5;
  // Use the midpoint query instead of a random draw (overfitting checks).
  bool fixed_query = false;
  int val_queries = 16;

  void Validate() const;
  double LearningRateAt(int epoch) const;
};

// Decoupled weight decay Adam.
class AdamW {
 public:
  AdamW(Eigen::Index n, const TrainConfig& cfg);
  void Step(Eigen::VectorXd* params, const Eigen::VectorXd& grad, double lr);
  int64_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  Eigen::VectorXd m_, v_;
  int64_t t_ = 0;
};

// Training clips reference windows of whole-track stem audio.
struct ClipRef {
  int track = 0;
  Eigen::Index start = 0;
  Eigen::Index length = 0;
  std::vector<QuerySpec> specs;
};

struct TrainingSet {
  std::vector<std::vector<SampleMatrix>> tracks;  // [track][stem] C x N
  std::vector<ClipRef> clips;                     // only clips with specs

  Eigen::Index num_specs() const;
  auto Stem(const ClipRef& clip, int stem) const {
    return tracks[clip.track][stem].middleCols(clip.start, clip.length);
  }
};

// Mixture of `spec`'s mixture stems and target of its targets, with optional
// per-stem gain and channel swap applied identically to both.
struct Example {
  SampleMatrix mixture;
  SampleMatrix target;
};
Example make_example(const TrainingSet& data, const ClipRef& clip,
                     const QuerySpec& spec, const TrainConfig& cfg,
                     std::mt19937_64* rng);

struct StepRecord {
  int epoch = 0;
  int64_t step = 0;
  double lr = 0;
  double total = 0;  // mean J over the batch
  double recon = 0;
  double reg = 0;
  double weight = 0;
  double snr_db = 0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double mean_total = 0;
  double val_median_snr = 0;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

using TrainProgress = std::function<void(const StepRecord&)>;

// Throws std::runtime_error if the objective becomes non-finite.
TrainHistory train(SeparatorModel* model, const TrainingSet& data,
                   const LossConfig& loss_cfg, const TrainConfig& cfg,
                   const TrainingSet* validation = nullptr,
                   const TrainProgress& progress = nullptr);

// One line per step, values printed with round-trip precision.
void WriteLossTrace(const std::filesystem::path& path, const TrainHistory& history);
std::string FormatLossTrace(const TrainHistory& history);

}  // namespace regionsep

#endif  // REGIONSEP_TRAINING_H_
