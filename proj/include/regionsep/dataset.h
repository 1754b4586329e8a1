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

// Multi-stem tracks: synthetic generation, folder ingestion, chunking into
// clips, mixing, split assignment and the dataset manifest.

#ifndef REGIONSEP_DATASET_H_
#define REGIONSEP_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regionsep/signal.h"

namespace regionsep {

struct StemTrack {
  std::string track_id;
  int sample_rate = 16000;
  std::vector<std::string> stem_ids;
  std::vector<std::string> labels;
  std::vector<SampleMatrix> stems;  // C x N each

  Eigen::Index num_stems() const { return static_cast<Eigen::Index>(stems.size()); }
  Eigen::Index frames() const { return stems.empty() ? 0 : stems.front().cols(); }
  Eigen::Index channels() const { return stems.empty() ? 0 : stems.front().rows(); }
  double duration() const { return static_cast<double>(frames()) / sample_rate; }
  // Equal shapes, matching id/label counts, unique stem ids, finite audio.
  void Validate() const;
};

struct ClipIndex {
  std::string clip_id;
  std::string track_id;
  double start = 0;    // seconds
  double length = 10;  // seconds
  Eigen::Index start_sample = 0;
  Eigen::Index length_samples = 0;
};

// Number of maximal windows; 0 when the track is shorter than the window.
Eigen::Index chunk_count(Eigen::Index frames, Eigen::Index window, Eigen::Index stride);

// All maximal windows of `window` seconds every `stride` seconds. Sets
// `warning` when the track yields no clip.
std::vector<ClipIndex> chunk_track(const StemTrack& track, double window = 10.0,
                                   double stride = 1.0, std::string* warning = nullptr);

std::string MakeClipId(const std::string& track_id, Eigen::Index start_sample,
                       int sample_rate);

// Sample-exact sum in the given order; empty input gives silence of the
// requested shape.
SampleMatrix mix(const std::vector<const SampleMatrix*>& stems,
                 Eigen::Index channels = 0, Eigen::Index frames = 0);

// Built-in archetype names, spectrally disjoint: bass, tom, lead, pad, organ,
// chirp, snare, hihat.
const std::vector<std::string>& DefaultArchetypes();

struct SynthConfig {
  int num_tracks = 24;
  double track_seconds = 30.0;
  int min_stems = 5;
  int max_stems = 8;
  int sample_rate = 16000;
  int channels = 2;
  std::vector<std::string> archetypes = DefaultArchetypes();
  // Probability that a stem is muted for a stretch longer than one clip.
  double silence_probability = 0.3;
  double min_level_db = -26.0;
  double max_level_db = -14.0;

  void Validate() const;
};

// Track i is generated from its own stream seeded by (seed, i). Samples are
// rounded to float32 so that written and reloaded audio match exactly.
StemTrack generate_synthetic_track(const SynthConfig& cfg, uint64_t seed, int index);
std::vector<StemTrack> generate_synthetic_tracks(const SynthConfig& cfg, uint64_t seed);

// Folder of equal-length WAV stems plus labels.json mapping file name to class
// label, e.g. {"bass.wav": "bass"}. The folder name becomes the track id.
StemTrack ingest_stem_folder(const std::filesystem::path& dir);

enum class Split { kTrain, kValidation, kTest };
std::string SplitName(Split s);
Split ParseSplit(const std::string& name);

struct SplitRatios {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
  void Validate() const;
};

uint64_t Fnv1a64(const std::string& s);
// Pure function of the track id and the ratios (FNV-1a, then a splitmix64
// finalizer, mapped to [0, 1)).
Split assign_split(const std::string& track_id, const SplitRatios& ratios = {});

struct ManifestStem {
  std::string stem_id;
  std::string label;
  std::string path;  // relative to the manifest directory
};

struct ManifestClip {
  std::string clip_id;
  Eigen::Index start = 0;   // samples
  Eigen::Index length = 0;  // samples
  std::vector<int> available;  // filled by precompute
};

struct ManifestTrack {
  std::string track_id;
  Split split = Split::kTrain;
  int sample_rate = 16000;
  int channels = 2;
  Eigen::Index frames = 0;
  std::vector<ManifestStem> stems;
  std::vector<ManifestClip> clips;
  std::string embeddings;  // relative path, empty before precompute
  std::string specs;       // relative path, empty before precompute
};

// Line-delimited JSON: a header object followed by one object per track.
struct Manifest {
  static constexpr int kVersion = 1;
  std::filesystem::path root;  // directory holding the manifest; not serialized
  double window_seconds = 10.0;
  double stride_seconds = 1.0;
  SplitRatios ratios;
  uint64_t seed = 0;
  std::vector<std::string> classes;
  std::string pca;  // relative path, empty before precompute
  std::vector<ManifestTrack> tracks;

  std::vector<const ManifestTrack*> TracksIn(Split split) const;
  const ManifestTrack* FindTrack(const std::string& track_id) const;
  // Track and clip position of a clip id; returns false if unknown.
  bool FindClip(const std::string& clip_id, const ManifestTrack** track,
                const ManifestClip** clip) const;
  std::filesystem::path Resolve(const std::string& relative) const { return root / relative; }

  std::string Encode() const;
  static Manifest Decode(const std::string& text, const std::filesystem::path& root);
  // Written to a temporary file and renamed into place.
  void Save(const std::filesystem::path& path) const;
  static Manifest Load(const std::filesystem::path& path);
};

inline constexpr const char* kManifestName = "manifest.jsonl";

// Reads every stem of the track and checks it against the manifest entry.
StemTrack LoadTrack(const Manifest& manifest, const ManifestTrack& entry);

}  // namespace regionsep

#endif  // REGIONSEP_DATASET_H_
