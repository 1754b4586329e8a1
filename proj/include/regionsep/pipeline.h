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

// Dataset-level stages behind the command-line tool.
//
// Dataset directory layout:
//   manifest.jsonl               index (see dataset.h)
//   audio/<track>/<stem>.wav     whole-track stems; clips reference offsets
//   embeddings/<track>.jsonl     raw embedding per clip and stem,
//                                source id "<clip_id>/<stem_id>"
//   pca.json                     PCA fit on training-split embeddings
//   specs/<track>.rsq            query specs of every clip of the track
//   specs/<track>.txt            readable summary of the same specs

#ifndef REGIONSEP_PIPELINE_H_
#define REGIONSEP_PIPELINE_H_

#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regionsep/config.h"
#include "regionsep/dataset.h"
#include "regionsep/embedding.h"
#include "regionsep/query_precompute.h"
#include "regionsep/retrieval.h"
#include "regionsep/separator.h"
#include "regionsep/training.h"

namespace regionsep {

// A required file is missing or stale. what() carries a remediation hint.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Log = std::function<void(const std::string&)>;

// Writes the tracks' stems and a fresh manifest. Split assignment follows the
// track ids.
Manifest write_dataset(const std::vector<StemTrack>& tracks, const PipelineConfig& cfg,
                       const std::filesystem::path& dir, const Log& log = nullptr);
Manifest generate_dataset(const PipelineConfig& cfg, const std::filesystem::path& dir,
                          const Log& log = nullptr);
// Every subdirectory of `root` holding WAV stems and labels.json is a track.
Manifest ingest_dataset(const PipelineConfig& cfg, const std::filesystem::path& root,
                        const std::filesystem::path& dir, const Log& log = nullptr);

struct PrecomputeSummary {
  int clips = 0;
  int clips_with_specs = 0;
  int specs = 0;
  double explained_variance = 0;
};

// Embeds every clip stem, fits the PCA on available training stems, builds
// the query specs and rewrites the manifest with the new references.
PrecomputeSummary precompute_dataset(const PipelineConfig& cfg,
                                     const std::filesystem::path& manifest_path,
                                     const Log& log = nullptr);

// Metadata of one clip after precompute; no audio.
struct ClipView {
  std::string clip_id;
  const ManifestTrack* track = nullptr;
  const ManifestClip* clip = nullptr;
  Eigen::MatrixXd raw_embeddings;  // n x P, track stem order
  Eigen::MatrixXd embeddings;      // n x D, projected
  std::vector<QuerySpec> specs;
};

// Manifest, PCA, embeddings and specs of a precomputed dataset.
struct DatasetView {
  Manifest manifest;
  Pca pca;
  std::vector<ClipView> clips;  // manifest order
  std::map<std::string, size_t> clip_index;

  const ClipView* FindClip(const std::string& clip_id) const;
  std::vector<const ClipView*> ClipsIn(Split split) const;
};

// Throws ArtifactError when the dataset has not been precomputed.
DatasetView LoadDatasetView(const std::filesystem::path& manifest_path);

// Loads the audio of every track in `split` and keeps clips with specs.
TrainingSet BuildTrainingSet(const DatasetView& view, Split split);

struct TrainOutput {
  std::filesystem::path model;
  std::filesystem::path loss_trace;
  TrainHistory history;
};

inline constexpr const char* kModelFile = "model.rsqm";
inline constexpr const char* kLossTraceFile = "loss_trace.tsv";

TrainOutput train_on_dataset(const PipelineConfig& cfg,
                             const std::filesystem::path& manifest_path,
                             const std::filesystem::path& out_dir, const Log& log = nullptr);

enum class EvalMode { kSingleSource, kMultiSource };
std::string EvalModeName(EvalMode m);
EvalMode ParseEvalMode(const std::string& name);

struct EvalOptions {
  EvalMode mode = EvalMode::kMultiSource;
  bool oracle = true;
  std::filesystem::path model;  // used when !oracle
  Split split = Split::kTest;
};

// Per-query records for every evaluated spec (and alpha, in single-source
// mode).
std::vector<QueryRecord> evaluate_dataset(const PipelineConfig& cfg, const DatasetView& view,
                                          const EvalOptions& options, const Log& log = nullptr);

// Records whose SNR is the best over the alpha grid for their (clip, query).
std::vector<QueryRecord> BestAlphaRecords(const std::vector<QueryRecord>& records);

inline constexpr const char* kRecordsFile = "records.jsonl";

// Every CSV derived from the records; a pure function of its inputs.
std::map<std::string, std::string> RenderReports(const std::vector<QueryRecord>& records,
                                                 double threshold);
// Writes the records and RenderReports output into `out_dir`.
void WriteEvaluation(const std::vector<QueryRecord>& records, double threshold,
                     const std::filesystem::path& out_dir);
// Regenerates the CSVs from `out_dir`/records.jsonl.
std::map<std::string, std::string> RegenerateReports(const std::filesystem::path& out_dir,
                                                     double threshold);

// Oracle extraction of spec `query_id` of a clip at interpolation t. Writes
// mixture.wav, target.wav and extraction.wav into `out_dir`; returns the
// member stem ids.
std::vector<std::string> oracle_separate_clip(const DatasetView& view,
                                              const std::string& clip_id, int query_id,
                                              double t, const std::filesystem::path& out_dir);

// Clip-length stem audio of one clip, track stem order.
std::vector<SampleMatrix> LoadClipStems(const DatasetView& view, const ClipView& clip);

void WriteTextFile(const std::filesystem::path& path, const std::string& text);
std::string ReadTextFile(const std::filesystem::path& path);

}  // namespace regionsep

#endif  // REGIONSEP_PIPELINE_H_
