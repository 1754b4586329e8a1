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

#include "regionsep/embedding.h"

#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"

namespace regionsep {
namespace {

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::MatrixXd MelFilterbank(int bands, int fft_size, int sample_rate) {
  const int bins = fft_size / 2 + 1;
  const double top = HzToMel(sample_rate / 2.0);
  std::vector<double> edges(bands + 2);
  for (int i = 0; i < bands + 2; ++i) {
    edges[i] = MelToHz(top * i / (bands + 1));
  }
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(bands, bins);
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  for (int b = 0; b < bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (int f = 0; f < bins; ++f) {
      const double hz = f * bin_hz;
      if (hz > lo && hz < hi) {
        fb(b, f) = hz <= mid ? (hz - lo) / (mid - lo) : (hi - hz) / (hi - mid);
      }
    }
    if (fb.row(b).sum() == 0.0) {
      // Narrower than one bin: take the bin nearest the center.
      const int f = std::min(bins - 1, static_cast<int>(std::lround(mid / bin_hz)));
      fb(b, f) = 1.0;
    }
  }
  return fb;
}

}  // namespace

void EmbeddingSet::Validate() const {
  if (static_cast<Eigen::Index>(source_ids.size()) != vectors.rows()) {
    throw std::invalid_argument("embedding set: id count does not match rows");
  }
  std::set<std::string> seen;
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    if (!vectors.row(i).allFinite()) {
      throw std::invalid_argument("embedding set: row " + std::to_string(i) +
                                  " is not finite");
    }
    if (!seen.insert(source_ids[i]).second) {
      throw std::invalid_argument("embedding set: duplicate source id '" +
                                  source_ids[i] + "'");
    }
  }
}

MockEmbedder::MockEmbedder(const MockEmbedderConfig& cfg, int sample_rate)
    : cfg_(cfg),
      sample_rate_(sample_rate),
      stft_(cfg.stft),
      filterbank_(MelFilterbank(cfg.dim, cfg.stft.fft_size, sample_rate)) {
  if (cfg.dim < 2) throw std::invalid_argument("mock embedder: dim must be >= 2");
}

Eigen::VectorXd MockEmbedder::operator()(const AudioChunk& audio) const {
  audio.Validate();
  if (audio.sample_rate != sample_rate_) {
    throw std::invalid_argument("mock embedder: sample rate mismatch");
  }
  if (audio.seconds() < cfg_.min_seconds ||
      audio.frames() < cfg_.stft.fft_size) {
    throw std::invalid_argument("mock embedder: audio shorter than " +
                                std::to_string(cfg_.min_seconds) + " s");
  }
  const Spectrogram spec = stft_.Forward(audio.samples);
  Eigen::VectorXd magnitude = Eigen::VectorXd::Zero(spec.bins());
  for (Eigen::Index c = 0; c < spec.channels(); ++c) {
    magnitude += spec[c].cwiseAbs().rowwise().sum();
  }
  magnitude /= static_cast<double>(spec.channels() * spec.frames());
  const Eigen::VectorXd energy =
      filterbank_ * magnitude.array().square().matrix();
  const double total = energy.sum();
  if (!(total > 0.0)) return Eigen::VectorXd::Zero(cfg_.dim);
  // Relative floor keeps the log energies exactly gain-shifted.
  Eigen::VectorXd logs = (energy.array() + 1e-12 * total).log().matrix();
  logs.array() -= logs.mean();
  const double norm = logs.norm();
  if (!(norm > 0.0)) return Eigen::VectorXd::Zero(cfg_.dim);
  return logs / norm;
}

Eigen::VectorXd mock_embed(const AudioChunk& audio,
                           const MockEmbedderConfig& cfg) {
  return MockEmbedder(cfg, audio.sample_rate)(audio);
}

EmbeddingSet import_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings " + path.string());
  std::vector<std::vector<double>> rows;
  EmbeddingSet set;
  std::string line;
  Eigen::Index dim = -1;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ": row " + std::to_string(row);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(where + ": malformed record (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("stem_id") || !j.contains("values") ||
        !j["values"].is_array() || !j["stem_id"].is_string()) {
      throw std::runtime_error(where + ": expected {stem_id, P, values}");
    }
    std::vector<double> values;
    for (const auto& v : j["values"]) {
      if (!v.is_number()) throw std::runtime_error(where + ": non-numeric value");
      values.push_back(v.get<double>());
    }
    const auto declared =
        j.contains("P") ? j["P"].get<Eigen::Index>()
                        : static_cast<Eigen::Index>(values.size());
    if (declared != static_cast<Eigen::Index>(values.size())) {
      throw std::runtime_error(where + ": declared P=" + std::to_string(declared) +
                               " but found " + std::to_string(values.size()) +
                               " values");
    }
    if (dim >= 0 && declared != dim) {
      throw std::runtime_error(where + ": dimension " + std::to_string(declared) +
                               " differs from earlier rows (" +
                               std::to_string(dim) + ")");
    }
    dim = declared;
    for (double v : values) {
      if (!std::isfinite(v)) throw std::runtime_error(where + ": non-finite value");
    }
    std::string id = j["stem_id"].get<std::string>();
    if (j.contains("clip_id") && j["clip_id"].is_string()) {
      id = j["clip_id"].get<std::string>() + "/" + id;
    }
    set.source_ids.push_back(std::move(id));
    rows.push_back(std::move(values));
  }
  set.vectors.resize(static_cast<Eigen::Index>(rows.size()), std::max<Eigen::Index>(dim, 0));
  for (size_t i = 0; i < rows.size(); ++i) {
    set.vectors.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(rows[i].data(), dim);
  }
  set.Validate();
  return set;
}

void export_embeddings(const std::filesystem::path& path,
                       const EmbeddingSet& set) {
  set.Validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index i = 0; i < set.size(); ++i) {
    nlohmann::json j;
    j["stem_id"] = set.source_ids[i];
    j["P"] = set.space_dim();
    std::vector<double> v(set.space_dim());
    for (Eigen::Index k = 0; k < set.space_dim(); ++k) v[k] = set.vectors(i, k);
    j["values"] = v;
    out << j.dump() << '\n';
  }
}

void SavePca(const std::filesystem::path& path, const Pca& model) {
  nlohmann::json j;
  j["format"] = "regionsep-pca";
  j["version"] = 1;
  j["P"] = model.input_dim();
  j["D"] = model.output_dim();
  j["mean"] = std::vector<double>(model.mean.data(),
                                  model.mean.data() + model.mean.size());
  std::vector<std::vector<double>> comps;
  for (Eigen::Index i = 0; i < model.output_dim(); ++i) {
    std::vector<double> row(model.input_dim());
    for (Eigen::Index k = 0; k < model.input_dim(); ++k) {
      row[k] = model.components(i, k);
    }
    comps.push_back(std::move(row));
  }
  j["components"] = comps;
  j["eigenvalues"] = std::vector<double>(
      model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size());
  j["total_variance"] = model.total_variance;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

Pca LoadPca(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("format", "") != "regionsep-pca") {
    throw std::runtime_error(path.string() + ": not a PCA model file");
  }
  Pca model;
  const auto mean = j["mean"].get<std::vector<double>>();
  model.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
  const auto comps = j["components"].get<std::vector<std::vector<double>>>();
  model.components.resize(static_cast<Eigen::Index>(comps.size()),
                          model.mean.size());
  for (size_t i = 0; i < comps.size(); ++i) {
    if (comps[i].size() != mean.size()) {
      throw std::runtime_error(path.string() + ": component row size mismatch");
    }
    for (size_t k = 0; k < mean.size(); ++k) {
      model.components(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          comps[i][k];
    }
  }
  const auto eig = j["eigenvalues"].get<std::vector<double>>();
  model.eigenvalues = Eigen::Map<const Eigen::VectorXd>(eig.data(), eig.size());
  model.total_variance = j["total_variance"].get<double>();
  return model;
}

}  // namespace regionsep
