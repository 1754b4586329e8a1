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

#include "regionsep/dataset.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

#include "json.hpp"
#include "regionsep/query_precompute.h"
#include "regionsep/wav.h"

namespace regionsep {

void StemTrack::Validate() const {
  if (stems.empty()) throw std::invalid_argument("track " + track_id + ": no stems");
  if (stem_ids.size() != stems.size() || labels.size() != stems.size()) {
    throw std::invalid_argument("track " + track_id + ": id/label count mismatch");
  }
  std::set<std::string> seen;
  for (size_t i = 0; i < stems.size(); ++i) {
    if (stems[i].rows() != channels() || stems[i].cols() != frames()) {
      throw std::invalid_argument("track " + track_id + ": stem '" + stem_ids[i] +
                                  "' has a different shape");
    }
    if (!stems[i].allFinite()) {
      throw std::invalid_argument("track " + track_id + ": stem '" + stem_ids[i] +
                                  "' is not finite");
    }
    if (!seen.insert(stem_ids[i]).second) {
      throw std::invalid_argument("track " + track_id + ": duplicate stem id '" +
                                  stem_ids[i] + "'");
    }
  }
}

Eigen::Index chunk_count(Eigen::Index frames, Eigen::Index window, Eigen::Index stride) {
  if (window <= 0 || stride <= 0) throw std::invalid_argument("chunk: window and stride must be > 0");
  return frames < window ? 0 : (frames - window) / stride + 1;
}

std::string MakeClipId(const std::string& track_id, Eigen::Index start_sample,
                       int sample_rate) {
  char buf[64];
  if (start_sample % sample_rate == 0) {
    std::snprintf(buf, sizeof(buf), "@%lld", static_cast<long long>(start_sample / sample_rate));
  } else {
    std::snprintf(buf, sizeof(buf), "@s%lld", static_cast<long long>(start_sample));
  }
  return track_id + buf;
}

std::vector<ClipIndex> chunk_track(const StemTrack& track, double window, double stride,
                                   std::string* warning) {
  const auto w = static_cast<Eigen::Index>(std::llround(window * track.sample_rate));
  const auto s = static_cast<Eigen::Index>(std::llround(stride * track.sample_rate));
  const Eigen::Index n = chunk_count(track.frames(), w, s);
  if (n == 0 && warning != nullptr) {
    *warning = "track " + track.track_id + " is shorter than one " +
               std::to_string(window) + " s window; no clips";
  }
  std::vector<ClipIndex> clips;
  for (Eigen::Index i = 0; i < n; ++i) {
    ClipIndex c;
    c.track_id = track.track_id;
    c.start_sample = i * s;
    c.length_samples = w;
    c.start = static_cast<double>(c.start_sample) / track.sample_rate;
    c.length = static_cast<double>(w) / track.sample_rate;
    c.clip_id = MakeClipId(track.track_id, c.start_sample, track.sample_rate);
    clips.push_back(std::move(c));
  }
  return clips;
}

SampleMatrix mix(const std::vector<const SampleMatrix*>& stems, Eigen::Index channels,
                 Eigen::Index frames) {
  if (stems.empty()) return SampleMatrix::Zero(channels, frames);
  SampleMatrix out = SampleMatrix::Zero(stems.front()->rows(), stems.front()->cols());
  for (const auto* s : stems) {
    if (s->rows() != out.rows() || s->cols() != out.cols()) {
      throw std::invalid_argument("mix: stems differ in shape");
    }
    out += *s;
  }
  return out;
}

const std::vector<std::string>& DefaultArchetypes() {
  static const std::vector<std::string> names = {"bass", "tom",   "lead",  "pad",
                                                 "organ", "chirp", "snare", "hihat"};
  return names;
}

void SynthConfig::Validate() const {
  if (num_tracks < 1) throw std::invalid_argument("synth: num_tracks must be >= 1");
  if (!(track_seconds > 0)) throw std::invalid_argument("synth: track_seconds must be > 0");
  if (archetypes.size() < 4 || archetypes.size() > 12) {
    throw std::invalid_argument("synth: between 4 and 12 archetypes required");
  }
  const auto& known = DefaultArchetypes();
  std::set<std::string> seen;
  for (const auto& a : archetypes) {
    if (std::find(known.begin(), known.end(), a) == known.end()) {
      throw std::invalid_argument("synth: unknown archetype '" + a + "'");
    }
    if (!seen.insert(a).second) throw std::invalid_argument("synth: duplicate archetype '" + a + "'");
  }
  if (min_stems < 2 || max_stems < min_stems ||
      max_stems > static_cast<int>(archetypes.size())) {
    throw std::invalid_argument("synth: need 2 <= min_stems <= max_stems <= archetypes");
  }
  if (sample_rate < 8000 || channels < 1 || channels > 2) {
    throw std::invalid_argument("synth: unsupported sample rate or channel count");
  }
  if (!(silence_probability >= 0 && silence_probability <= 1) ||
      !(min_level_db <= max_level_db)) {
    throw std::invalid_argument("synth: invalid silence or level settings");
  }
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * Uniform01(rng);
}

template <typename T>
const T& Choose(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::min(v.size() - 1, static_cast<size_t>(Uniform01(rng) * v.size()))];
}

// White noise restricted to [lo, hi] Hz.
Eigen::VectorXd BandNoise(std::mt19937_64& rng, Eigen::Index n, int rate, double lo,
                          double hi) {
  std::vector<double> time(n);
  for (auto& v : time) v = StandardNormal(rng);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, time);
  for (size_t k = 0; k < freq.size(); ++k) {
    const double hz = static_cast<double>(k) * rate / static_cast<double>(n);
    if (hz < lo || hz > hi) freq[k] = 0.0;
  }
  fft.inv(time, freq, n);
  return Eigen::Map<Eigen::VectorXd>(time.data(), n);
}

// Decaying hits on a grid; each hit lasts until the next grid point.
Eigen::VectorXd HitEnvelope(std::mt19937_64& rng, Eigen::Index n, int rate, double grid,
                            double offset, double probability, double tau) {
  Eigen::VectorXd env = Eigen::VectorXd::Zero(n);
  const auto step = static_cast<Eigen::Index>(grid * rate);
  bool first = true;
  for (auto start = static_cast<Eigen::Index>(offset * rate); start < n; start += step) {
    if (!first && Uniform01(rng) >= probability) continue;
    first = false;
    const double amp = Uniform(rng, 0.7, 1.0);
    for (Eigen::Index i = 0; i < step && start + i < n; ++i) {
      const double t = static_cast<double>(i) / rate;
      env[start + i] = amp * (1.0 - std::exp(-t / 0.002)) * std::exp(-t / tau);
    }
  }
  return env;
}

double NoteEnvelope(double t, double len, double attack, double release) {
  const double a = std::min(1.0, t / attack);
  const double r = std::min(1.0, std::max(0.0, (len - t) / release));
  return a * r;
}

Eigen::VectorXd Bass(std::mt19937_64& rng, Eigen::Index n, int rate) {
  const double root = Uniform(rng, 55, 82);
  const std::vector<double> steps = {1.0, 9.0 / 8, 5.0 / 4, 4.0 / 3, 3.0 / 2};
  const double note = Choose(rng, std::vector<double>{0.25, 0.5});
  const auto len = static_cast<Eigen::Index>(note * rate);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  for (Eigen::Index start = 0; start < n; start += len) {
    const double f0 = root * Choose(rng, steps);
    for (Eigen::Index i = 0; i < len && start + i < n; ++i) {
      const double t = static_cast<double>(i) / rate;
      double v = 0;
      for (int k = 1; k <= 6 && k * f0 < 400; ++k) v += std::sin(kTwoPi * k * f0 * t) / k;
      s[start + i] = v * (1 - std::exp(-t / 0.005)) * std::exp(-t / 0.35);
    }
  }
  return s;
}

Eigen::VectorXd Tom(std::mt19937_64& rng, Eigen::Index n, int rate) {
  const double f0 = Uniform(rng, 480, 620);
  const auto step = static_cast<Eigen::Index>(0.25 * rate);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  bool first = true;
  for (Eigen::Index start = 0; start < n; start += step) {
    if (!first && Uniform01(rng) >= 0.6) continue;
    first = false;
    for (Eigen::Index i = 0; i < step && start + i < n; ++i) {
      const double t = static_cast<double>(i) / rate;
      const double phase = kTwoPi * f0 * (t + 0.3 * 0.03 * (1 - std::exp(-t / 0.03)));
      s[start + i] = std::sin(phase) * (1 - std::exp(-t / 0.002)) * std::exp(-t / 0.12);
    }
  }
  return s;
}

Eigen::VectorXd Lead(std::mt19937_64& rng, Eigen::Index n, int rate) {
  const double base = Uniform(rng, 880, 1000);
  const std::vector<double> steps = {1.0, 9.0 / 8, 5.0 / 4};
  const double vib_rate = Uniform(rng, 5, 7);
  const double vib_depth = 12.0;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  double phase = 0;
  Eigen::Index start = 0;
  while (start < n) {
    const double note = Choose(rng, std::vector<double>{0.25, 0.375, 0.5});
    const auto len = static_cast<Eigen::Index>(note * rate);
    const double f = base * Choose(rng, steps);
    for (Eigen::Index i = 0; i < len && start + i < n; ++i) {
      const double t = static_cast<double>(start + i) / rate;
      const double tl = static_cast<double>(i) / rate;
      phase += kTwoPi * (f + vib_depth * std::sin(kTwoPi * vib_rate * t)) / rate;
      s[start + i] = std::sin(phase) * NoteEnvelope(tl, note, 0.015, 0.015);
    }
    start += len;
  }
  return s;
}

Eigen::VectorXd Pad(std::mt19937_64& rng, Eigen::Index n, int rate) {
  const double f = Uniform(rng, 1380, 1450);
  const double am = Uniform(rng, 2, 4);
  const std::vector<double> shifts = {1.0, 1.03, 0.97};
  const auto len = static_cast<Eigen::Index>(2.0 * rate);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  for (Eigen::Index start = 0; start < n; start += len) {
    const double root = f * Choose(rng, shifts);
    for (Eigen::Index i = 0; i < len && start + i < n; ++i) {
      const double t = static_cast<double>(start + i) / rate;
      const double tl = static_cast<double>(i) / rate;
      const double v = std::sin(kTwoPi * root * t) + 0.8 * std::sin(kTwoPi * root * 1.2 * t) +
                       0.6 * std::sin(kTwoPi * root * 1.45 * t);
      s[start + i] = v * (1 + 0.6 * std::sin(kTwoPi * am * t)) * NoteEnvelope(tl, 2.0, 0.1, 0.1);
    }
  }
  return s;
}

Eigen::VectorXd Organ(std::mt19937_64& rng, Eigen::Index n, int rate) {
  const double f0 = Uniform(rng, 2250, 2350);
  const std::vector<double> shifts = {1.0, 1.05, 0.95};
  const auto len = static_cast<Eigen::Index>(1.0 * rate);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  for (Eigen::Index start = 0; start < n; start += len) {
    const double f = f0 * Choose(rng, shifts);
    for (Eigen::Index i = 0; i < len && start + i < n; ++i) {
      const double t = static_cast<double>(start + i) / rate;
      const double tl = static_cast<double>(i) / rate;
      const double v = std::sin(kTwoPi * f * t) + 0.7 * std::sin(kTwoPi * f * 1.003 * t) +
                       0.4 * std::sin(kTwoPi * f * 1.25 * t);
      s[start + i] = v * NoteEnvelope(tl, 1.0, 0.01, 0.01);
    }
  }
  return s;
}

Eigen::VectorXd Chirp(std::mt19937_64& rng, Eigen::Index n, int rate) {
  const auto slot = static_cast<Eigen::Index>(0.5 * rate);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  for (Eigen::Index start = 0; start < n; start += slot) {
    const double lo = Uniform(rng, 3200, 3400);
    const double hi = Uniform(rng, 4200, 4500);
    const double dur = Uniform(rng, 0.3, 0.5);
    const double k = (hi - lo) / dur;
    for (Eigen::Index i = 0; i < slot && start + i < n; ++i) {
      const double t = static_cast<double>(i) / rate;
      if (t >= dur) break;
      const double shape = std::sin(std::numbers::pi * t / dur);
      s[start + i] = std::sin(kTwoPi * (lo * t + 0.5 * k * t * t)) * shape * shape;
    }
  }
  return s;
}

Eigen::VectorXd Snare(std::mt19937_64& rng, Eigen::Index n, int rate) {
  const Eigen::VectorXd noise = BandNoise(rng, n, rate, 4800, 6000);
  return noise.cwiseProduct(HitEnvelope(rng, n, rate, 0.5, 0.25, 0.9, 0.09));
}

Eigen::VectorXd Hihat(std::mt19937_64& rng, Eigen::Index n, int rate) {
  const Eigen::VectorXd noise = BandNoise(rng, n, rate, 6500, 7800);
  return noise.cwiseProduct(HitEnvelope(rng, n, rate, 0.125, 0.0, 0.8, 0.03));
}

Eigen::VectorXd Render(const std::string& name, std::mt19937_64& rng, Eigen::Index n,
                       int rate) {
  if (name == "bass") return Bass(rng, n, rate);
  if (name == "tom") return Tom(rng, n, rate);
  if (name == "lead") return Lead(rng, n, rate);
  if (name == "pad") return Pad(rng, n, rate);
  if (name == "organ") return Organ(rng, n, rate);
  if (name == "chirp") return Chirp(rng, n, rate);
  if (name == "snare") return Snare(rng, n, rate);
  if (name == "hihat") return Hihat(rng, n, rate);
  throw std::invalid_argument("unknown archetype '" + name + "'");
}

}  // namespace

StemTrack generate_synthetic_track(const SynthConfig& cfg, uint64_t seed, int index) {
  cfg.Validate();
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(index + 1)));
  char id[32];
  std::snprintf(id, sizeof(id), "track%03d", index);
  StemTrack track;
  track.track_id = id;
  track.sample_rate = cfg.sample_rate;
  const auto n = static_cast<Eigen::Index>(std::llround(cfg.track_seconds * cfg.sample_rate));

  const int count =
      cfg.min_stems + static_cast<int>(Uniform01(rng) * (cfg.max_stems - cfg.min_stems + 1));
  std::vector<size_t> order(cfg.archetypes.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t i = order.size() - 1; i > 0; --i) {
    const auto j = std::min(i, static_cast<size_t>(Uniform01(rng) * (i + 1)));
    std::swap(order[i], order[j]);
  }
  order.resize(std::min<size_t>(order.size(), count));
  std::sort(order.begin(), order.end());

  for (size_t idx : order) {
    const std::string& name = cfg.archetypes[idx];
    Eigen::VectorXd s = Render(name, rng, n, cfg.sample_rate);
    const double level = Uniform(rng, cfg.min_level_db, cfg.max_level_db);
    const double current = std::sqrt(s.squaredNorm() / static_cast<double>(n));
    if (current > 0) s *= std::pow(10.0, level / 20.0) / current;
    if (Uniform01(rng) < cfg.silence_probability) {
      const double len = std::min(cfg.track_seconds, Uniform(rng, 11.0, 14.0));
      const double start = Uniform(rng, 0.0, cfg.track_seconds - len);
      const auto a = static_cast<Eigen::Index>(start * cfg.sample_rate);
      const auto b = std::min(n, static_cast<Eigen::Index>((start + len) * cfg.sample_rate));
      const auto fade = static_cast<Eigen::Index>(0.01 * cfg.sample_rate);
      for (Eigen::Index i = a; i < b; ++i) {
        const double in = std::min(1.0, std::max(0.0, static_cast<double>(i - a) / fade));
        const double out = std::min(1.0, std::max(0.0, static_cast<double>(b - i) / fade));
        s[i] *= 1.0 - std::min(in, out);
      }
    }
    SampleMatrix stem(cfg.channels, n);
    if (cfg.channels == 1) {
      stem.row(0) = s.transpose();
    } else {
      const double theta = Uniform(rng, 0.2, std::numbers::pi / 2 - 0.2);
      stem.row(0) = s.transpose() * (std::sqrt(2.0) * std::cos(theta));
      stem.row(1) = s.transpose() * (std::sqrt(2.0) * std::sin(theta));
    }
    QuantizeToFloat(stem);
    track.stem_ids.push_back(name);
    track.labels.push_back(name);
    track.stems.push_back(std::move(stem));
  }
  track.Validate();
  return track;
}

std::vector<StemTrack> generate_synthetic_tracks(const SynthConfig& cfg, uint64_t seed) {
  std::vector<StemTrack> tracks;
  for (int i = 0; i < cfg.num_tracks; ++i) tracks.push_back(generate_synthetic_track(cfg, seed, i));
  return tracks;
}

StemTrack ingest_stem_folder(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + ": not a directory");
  const fs::path labels_path = dir / "labels.json";
  if (!fs::exists(labels_path)) {
    throw std::runtime_error(dir.string() + ": missing labels.json sidecar");
  }
  std::ifstream in(labels_path);
  nlohmann::json labels;
  try {
    labels = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(labels_path.string() + ": " + e.what());
  }
  if (!labels.is_object()) throw std::runtime_error(labels_path.string() + ": expected an object");

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error(dir.string() + ": no .wav stems");

  StemTrack track;
  track.track_id = dir.filename().string();
  if (track.track_id.empty()) track.track_id = dir.parent_path().filename().string();
  std::vector<std::string> problems;
  std::vector<AudioChunk> audio;
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    if (!labels.contains(name) || !labels[name].is_string()) {
      problems.push_back(name + ": no label in labels.json");
      continue;
    }
    try {
      audio.push_back(ReadWav(f));
    } catch (const std::exception& e) {
      problems.push_back(e.what());
      continue;
    }
    track.stem_ids.push_back(f.stem().string());
    track.labels.push_back(labels[name].get<std::string>());
  }
  if (!audio.empty()) {
    track.sample_rate = audio.front().sample_rate;
    for (size_t i = 0; i < audio.size(); ++i) {
      const auto& a = audio[i];
      if (a.sample_rate != track.sample_rate) {
        problems.push_back(track.stem_ids[i] + ".wav: sample rate " +
                           std::to_string(a.sample_rate) + " differs from " +
                           std::to_string(track.sample_rate));
      }
      if (a.frames() != audio.front().frames() || a.channels() != audio.front().channels()) {
        problems.push_back(track.stem_ids[i] + ".wav: " + std::to_string(a.channels()) + "x" +
                           std::to_string(a.frames()) + " samples, expected " +
                           std::to_string(audio.front().channels()) + "x" +
                           std::to_string(audio.front().frames()));
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = dir.string() + ": rejected stem folder";
    for (const auto& p : problems) msg += "\n  " + p;
    throw std::runtime_error(msg);
  }
  for (auto& a : audio) track.stems.push_back(std::move(a.samples));
  track.Validate();
  return track;
}

std::string SplitName(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "train";
}

Split ParseSplit(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation" || name == "val") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + name + "'");
}

void SplitRatios::Validate() const {
  if (!(train >= 0 && validation >= 0 && test >= 0) ||
      std::abs(train + validation + test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be non-negative and sum to 1");
  }
}

uint64_t Fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Split assign_split(const std::string& track_id, const SplitRatios& ratios) {
  ratios.Validate();
  // FNV-1a alone leaves the top bits nearly constant for ids differing in the
  // last character; a splitmix64 finalizer spreads them.
  uint64_t z = Fnv1a64(track_id);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
  if (u < ratios.train) return Split::kTrain;
  if (u < ratios.train + ratios.validation) return Split::kValidation;
  return Split::kTest;
}

std::vector<const ManifestTrack*> Manifest::TracksIn(Split split) const {
  std::vector<const ManifestTrack*> out;
  for (const auto& t : tracks) {
    if (t.split == split) out.push_back(&t);
  }
  return out;
}

const ManifestTrack* Manifest::FindTrack(const std::string& track_id) const {
  for (const auto& t : tracks) {
    if (t.track_id == track_id) return &t;
  }
  return nullptr;
}

bool Manifest::FindClip(const std::string& clip_id, const ManifestTrack** track,
                        const ManifestClip** clip) const {
  for (const auto& t : tracks) {
    for (const auto& c : t.clips) {
      if (c.clip_id == clip_id) {
        if (track != nullptr) *track = &t;
        if (clip != nullptr) *clip = &c;
        return true;
      }
    }
  }
  return false;
}

std::string Manifest::Encode() const {
  nlohmann::json header;
  header["format"] = "regionsep-manifest";
  header["version"] = kVersion;
  header["window_seconds"] = window_seconds;
  header["stride_seconds"] = stride_seconds;
  header["split_ratios"] = {ratios.train, ratios.validation, ratios.test};
  header["seed"] = seed;
  header["classes"] = classes;
  header["pca"] = pca;
  std::string out = header.dump() + "\n";
  for (const auto& t : tracks) {
    nlohmann::json j;
    j["track_id"] = t.track_id;
    j["split"] = SplitName(t.split);
    j["sample_rate"] = t.sample_rate;
    j["channels"] = t.channels;
    j["frames"] = t.frames;
    nlohmann::json stems = nlohmann::json::array();
    for (const auto& s : t.stems) {
      stems.push_back({{"stem_id", s.stem_id}, {"label", s.label}, {"path", s.path}});
    }
    j["stems"] = stems;
    nlohmann::json clips = nlohmann::json::array();
    for (const auto& c : t.clips) {
      clips.push_back({{"clip_id", c.clip_id}, {"start", c.start}, {"length", c.length},
                       {"available", c.available}});
    }
    j["clips"] = clips;
    j["embeddings"] = t.embeddings;
    j["specs"] = t.specs;
    out += j.dump() + "\n";
  }
  return out;
}

Manifest Manifest::Decode(const std::string& text, const std::filesystem::path& root) {
  Manifest m;
  m.root = root;
  std::istringstream in(text);
  std::string line;
  int row = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::string where = "manifest row " + std::to_string(row);
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (j.value("format", "") != "regionsep-manifest") {
          throw std::runtime_error(where + ": not a regionsep manifest");
        }
        if (j.at("version").get<int>() != kVersion) {
          throw std::runtime_error(where + ": unsupported manifest version");
        }
        m.window_seconds = j.at("window_seconds").get<double>();
        m.stride_seconds = j.at("stride_seconds").get<double>();
        const auto r = j.at("split_ratios").get<std::vector<double>>();
        if (r.size() != 3) throw std::runtime_error(where + ": split_ratios needs 3 values");
        m.ratios = {r[0], r[1], r[2]};
        m.seed = j.at("seed").get<uint64_t>();
        m.classes = j.at("classes").get<std::vector<std::string>>();
        m.pca = j.at("pca").get<std::string>();
        have_header = true;
        continue;
      }
      ManifestTrack t;
      t.track_id = j.at("track_id").get<std::string>();
      t.split = ParseSplit(j.at("split").get<std::string>());
      t.sample_rate = j.at("sample_rate").get<int>();
      t.channels = j.at("channels").get<int>();
      t.frames = j.at("frames").get<Eigen::Index>();
      for (const auto& s : j.at("stems")) {
        t.stems.push_back({s.at("stem_id").get<std::string>(), s.at("label").get<std::string>(),
                           s.at("path").get<std::string>()});
      }
      for (const auto& c : j.at("clips")) {
        t.clips.push_back({c.at("clip_id").get<std::string>(), c.at("start").get<Eigen::Index>(),
                           c.at("length").get<Eigen::Index>(),
                           c.at("available").get<std::vector<int>>()});
      }
      t.embeddings = j.at("embeddings").get<std::string>();
      t.specs = j.at("specs").get<std::string>();
      m.tracks.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  if (!have_header) throw std::runtime_error("manifest: missing header line");
  return m;
}

void Manifest::Save(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << Encode();
  }
  std::filesystem::rename(tmp, path);
}

Manifest Manifest::Load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return Decode(ss.str(), path.parent_path());
}

StemTrack LoadTrack(const Manifest& manifest, const ManifestTrack& entry) {
  StemTrack track;
  track.track_id = entry.track_id;
  track.sample_rate = entry.sample_rate;
  for (const auto& s : entry.stems) {
    AudioChunk a = ReadWav(manifest.Resolve(s.path), entry.sample_rate);
    if (a.frames() != entry.frames || a.channels() != entry.channels) {
      throw std::runtime_error(manifest.Resolve(s.path).string() +
                               ": shape does not match the manifest");
    }
    track.stem_ids.push_back(s.stem_id);
    track.labels.push_back(s.label);
    track.stems.push_back(std::move(a.samples));
  }
  track.Validate();
  return track;
}

}  // namespace regionsep
