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

#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include <gtest/gtest.h>

#include "regionsep/dataset.h"
#include "regionsep/embedding.h"
#include "regionsep/wav.h"

namespace regionsep {
namespace {

namespace fs = std::filesystem;

StemTrack Silent(const std::string& id, double seconds, int rate = 1000) {
  StemTrack t;
  t.track_id = id;
  t.sample_rate = rate;
  t.stem_ids = {"a", "b"};
  t.labels = {"x", "y"};
  const auto n = static_cast<Eigen::Index>(seconds * rate);
  t.stems = {SampleMatrix::Zero(2, n), SampleMatrix::Zero(2, n)};
  return t;
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(ChunkTest, Counts) {
  std::string warning;
  EXPECT_EQ(chunk_track(Silent("t", 20), 10, 1, &warning).size(), 11u);
  EXPECT_TRUE(warning.empty());
  EXPECT_EQ(chunk_track(Silent("t", 10), 10, 1, &warning).size(), 1u);
  EXPECT_TRUE(chunk_track(Silent("t", 9), 10, 1, &warning).empty());
  EXPECT_NE(warning.find("shorter"), std::string::npos);
  EXPECT_EQ(chunk_count(20000, 10000, 1000), 11);
  EXPECT_EQ(chunk_count(9999, 10000, 1000), 0);

  const auto clips = chunk_track(Silent("t", 20), 10, 1);
  EXPECT_EQ(clips[3].start_sample, 3000);
  EXPECT_EQ(clips[3].length_samples, 10000);
  EXPECT_DOUBLE_EQ(clips[3].start, 3.0);
  EXPECT_EQ(clips[3].track_id, "t");
  EXPECT_NE(clips[3].clip_id, clips[4].clip_id);
}

TEST(MixTest, SampleExactSum) {
  SampleMatrix a = SampleMatrix::Random(2, 50), b = SampleMatrix::Random(2, 50);
  const SampleMatrix m = mix({&a, &b});
  EXPECT_EQ(m, SampleMatrix(a + b));
  EXPECT_EQ(mix({&a}), a);
  EXPECT_EQ(mix({}, 2, 7), SampleMatrix::Zero(2, 7));
  SampleMatrix c = SampleMatrix::Zero(1, 50);
  EXPECT_THROW(mix({&a, &c}), std::invalid_argument);
}

TEST(SynthTest, DeterministicPerSeed) {
  SynthConfig cfg;
  cfg.num_tracks = 2;
  cfg.track_seconds = 12;
  const StemTrack a = generate_synthetic_track(cfg, 42, 1);
  const StemTrack b = generate_synthetic_track(cfg, 42, 1);
  const StemTrack c = generate_synthetic_track(cfg, 43, 1);
  ASSERT_EQ(a.stems.size(), b.stems.size());
  for (size_t i = 0; i < a.stems.size(); ++i) EXPECT_EQ(a.stems[i], b.stems[i]);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_TRUE(a.stems.size() != c.stems.size() || a.stems[0] != c.stems[0]);
  a.Validate();
  EXPECT_GE(a.num_stems(), cfg.min_stems);
  EXPECT_LE(a.num_stems(), cfg.max_stems);
  EXPECT_EQ(a.frames(), 12 * 16000);
  // Stored as float32 values.
  for (const auto& s : a.stems) {
    EXPECT_EQ(s, s.cast<float>().cast<double>());
  }
}

TEST(SynthTest, ClassesAreSeparableInEmbeddingSpace) {
  SynthConfig cfg;
  cfg.num_tracks = 6;
  cfg.track_seconds = 10;
  cfg.silence_probability = 0;
  std::map<std::string, std::vector<Eigen::VectorXd>> by_label;
  MockEmbedder embed(MockEmbedderConfig{}, cfg.sample_rate);
  for (const auto& t : generate_synthetic_tracks(cfg, 5)) {
    for (Eigen::Index i = 0; i < t.num_stems(); ++i) {
      by_label[t.labels[i]].push_back(embed(AudioChunk(t.stems[i], t.sample_rate)));
    }
  }
  std::map<std::string, Eigen::VectorXd> centroid;
  double spread = 0;
  for (const auto& [label, v] : by_label) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(v.front().size());
    for (const auto& e : v) c += e;
    c /= static_cast<double>(v.size());
    centroid[label] = c;
    for (const auto& e : v) spread = std::max(spread, (e - c).norm());
  }
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& [a, ca] : centroid) {
    for (const auto& [b, cb] : centroid) {
      if (a < b) gap = std::min(gap, (ca - cb).norm());
    }
  }
  RecordProperty("centroid_gap", std::to_string(gap));
  RecordProperty("max_spread", std::to_string(spread));
  EXPECT_GT(gap, 2 * spread);
}

TEST(SplitTest, DeterministicAndProportional) {
  EXPECT_EQ(assign_split("track-7"), assign_split("track-7"));
  std::map<Split, int> counts;
  for (int i = 0; i < 3000; ++i) ++counts[assign_split("track-" + std::to_string(i))];
  EXPECT_NEAR(counts[Split::kTrain] / 3000.0, 0.70, 0.03);
  EXPECT_NEAR(counts[Split::kValidation] / 3000.0, 0.15, 0.03);
  EXPECT_NEAR(counts[Split::kTest] / 3000.0, 0.15, 0.03);
  // Ratios that put everything in one split.
  EXPECT_EQ(assign_split("x", SplitRatios{0, 0, 1}), Split::kTest);
  EXPECT_EQ(ParseSplit(SplitName(Split::kValidation)), Split::kValidation);
  EXPECT_THROW(ParseSplit("dev"), std::invalid_argument);
  EXPECT_THROW((SplitRatios{0.5, 0.5, 0.5}.Validate()), std::invalid_argument);
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

TEST(ManifestTest, RoundTrip) {
  Manifest m;
  m.seed = 9;
  m.classes = {"bass", "pad"};
  m.pca = "pca.json";
  ManifestTrack t;
  t.track_id = "t0";
  t.split = Split::kTest;
  t.frames = 160000;
  t.stems = {{"s0", "bass", "audio/t0/s0.wav"}, {"s1", "pad", "audio/t0/s1.wav"}};
  t.clips = {{"t0@0", 0, 160000, {0, 1}}};
  t.embeddings = "embeddings/t0.jsonl";
  t.specs = "specs/t0.rsq";
  m.tracks = {t};
  const std::string text = m.Encode();
  const Manifest back = Manifest::Decode(text, "/data");
  EXPECT_EQ(back.Encode(), text);
  EXPECT_EQ(back.root, fs::path("/data"));
  ASSERT_EQ(back.tracks.size(), 1u);
  EXPECT_EQ(back.tracks[0].split, Split::kTest);
  EXPECT_EQ(back.tracks[0].clips[0].available, (std::vector<int>{0, 1}));
  const ManifestTrack* track = nullptr;
  const ManifestClip* clip = nullptr;
  EXPECT_TRUE(back.FindClip("t0@0", &track, &clip));
  EXPECT_FALSE(back.FindClip("nope", &track, &clip));
  EXPECT_EQ(back.TracksIn(Split::kTrain).size(), 0u);
  EXPECT_THROW(Manifest::Decode("{\"format\": \"other\"}\n", "/"), std::runtime_error);
  EXPECT_THROW(Manifest::Decode("", "/"), std::runtime_error);
}

void WriteStem(const fs::path& p, Eigen::Index frames, int rate = 16000) {
  WriteWav(p, AudioChunk(SampleMatrix::Constant(2, frames, 0.25), rate));
}

TEST(IngestTest, ReadsLabelledFolder) {
  TempDir dir("regionsep_ingest_ok");
  const fs::path track = dir.path() / "song";
  fs::create_directories(track);
  WriteStem(track / "bass.wav", 1600);
  WriteStem(track / "keys.wav", 1600);
  std::ofstream(track / "labels.json") << R"({"bass.wav": "bass", "keys.wav": "pad"})";
  const StemTrack t = ingest_stem_folder(track);
  EXPECT_EQ(t.track_id, "song");
  EXPECT_EQ(t.stem_ids, (std::vector<std::string>{"bass", "keys"}));
  EXPECT_EQ(t.labels, (std::vector<std::string>{"bass", "pad"}));
  EXPECT_EQ(t.frames(), 1600);
  EXPECT_EQ(t.stems[0](1, 10), 0.25);
}

TEST(IngestTest, Diagnostics) {
  TempDir dir("regionsep_ingest_bad");
  const fs::path track = dir.path() / "song";
  fs::create_directories(track);
  WriteStem(track / "bass.wav", 1600);
  EXPECT_THROW(
      {
        try {
          ingest_stem_folder(track);
        } catch (const std::runtime_error& e) {
          EXPECT_NE(std::string(e.what()).find("labels.json"), std::string::npos);
          throw;
        }
      },
      std::runtime_error);
  WriteStem(track / "keys.wav", 1500);
  WriteStem(track / "drums.wav", 1600, 8000);
  std::ofstream(track / "labels.json") << R"({"bass.wav": "bass", "keys.wav": "pad"})";
  try {
    ingest_stem_folder(track);
    FAIL() << "expected rejection";
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("drums.wav: no label"), std::string::npos) << msg;
    EXPECT_NE(msg.find("keys.wav: 2x1500"), std::string::npos) << msg;
  }
  EXPECT_THROW(ingest_stem_folder(dir.path() / "missing"), std::runtime_error);
}

}  // namespace
}  // namespace regionsep
