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

// Band-split masking separator conditioned on a region query.
//
//   X = stft(g x)            g = 1 / max(rms(x), 1e-6)
//   V_b = tanh(Enc_b(X_b))   per band, per frame, R^D
//   (gamma, beta) = FCN(q)
//   U_b = gamma * V_b + beta
//   M_b = k tanh(Dec_b(U_b)) complex mask, |Re|, |Im| < k
//   y = istft(M * X) / g
//
// Encoder and decoder linear layers are weight-normalized per output row
// (w = g v / |v|). All parameters live in one flat vector.

#ifndef REGIONSEP_SEPARATOR_H_
#define REGIONSEP_SEPARATOR_H_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "regionsep/loss.h"
#include "regionsep/query_geometry.h"
#include "regionsep/signal.h"

namespace regionsep {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SeparatorDims {
  int channels = 2;
  StftConfig stft;
  int bands = 8;
  int embed_dim = 8;     // D of the bottleneck and of the query space
  int film_hidden = 64;
  int dec_hidden = 32;
  double mask_bound = 2.0;

  int bins() const { return stft.bins(); }
  int query_dim() const { return QueryVectorSize(embed_dim); }
  void Validate() const;
  bool operator==(const SeparatorDims&) const = default;
};

// Half-open bin ranges; equal widths, remainder in the last band.
std::vector<std::pair<int, int>> MakeBandMap(int bins, int bands);

// Mutable views of one weight-normalized layer inside the flat parameters.
struct WeightNormView {
  Eigen::Map<RowMatrix> v;
  Eigen::Map<Eigen::VectorXd> g;
  Eigen::Map<Eigen::VectorXd> bias;
};
struct LinearView {
  Eigen::Map<RowMatrix> w;
  Eigen::Map<Eigen::VectorXd> bias;
};

class SeparatorModel {
 public:
  explicit SeparatorModel(const SeparatorDims& dims = {});

  // Deterministic random initialization; initial masks are close to 0.5.
  static SeparatorModel Initialize(const SeparatorDims& dims, uint64_t seed);
  // Mask identically 1 + 0i for every input and query.
  static SeparatorModel AllOnes(const SeparatorDims& dims);

  const SeparatorDims& dims() const { return dims_; }
  const std::vector<std::pair<int, int>>& band_map() const { return bands_; }
  int band_width(int b) const { return bands_[b].second - bands_[b].first; }
  // Rows of encoder input / decoder output for band b: 2 * C * width.
  int band_features(int b) const { return 2 * dims_.channels * band_width(b); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::Index num_params() const { return params_.size(); }

  WeightNormView encoder(int b) { return WeightNormAt(enc_[b]); }
  WeightNormView decoder_hidden(int b) { return WeightNormAt(dec1_[b]); }
  WeightNormView decoder_out(int b) { return WeightNormAt(dec2_[b]); }
  LinearView film_hidden() { return LinearAt(film1_); }
  LinearView film_out() { return LinearAt(film2_); }

  // Effective weights g v / |v|.
  RowMatrix EncoderWeight(int b) const { return EffectiveWeight(enc_[b]); }
  RowMatrix DecoderHiddenWeight(int b) const { return EffectiveWeight(dec1_[b]); }
  RowMatrix DecoderOutWeight(int b) const { return EffectiveWeight(dec2_[b]); }

  // Throws unless every weight-norm direction row has positive norm and all
  // parameters are finite.
  void Validate() const;

  struct Layout {
    Eigen::Index offset = 0;  // v or w
    int rows = 0, cols = 0;
    Eigen::Index g = -1;      // -1 for plain linear layers
    Eigen::Index bias = 0;
  };
  const std::vector<Layout>& encoder_layout() const { return enc_; }
  const std::vector<Layout>& decoder_hidden_layout() const { return dec1_; }
  const std::vector<Layout>& decoder_out_layout() const { return dec2_; }
  const Layout& film_hidden_layout() const { return film1_; }
  const Layout& film_out_layout() const { return film2_; }

 private:
  void Build();
  WeightNormView WeightNormAt(const Layout& l);
  LinearView LinearAt(const Layout& l);
  RowMatrix EffectiveWeight(const Layout& l) const;

  SeparatorDims dims_;
  std::vector<std::pair<int, int>> bands_;
  std::vector<Layout> enc_, dec1_, dec2_;
  Layout film1_, film2_;
  Eigen::VectorXd params_;
};

// Per-band bottleneck features, one D x T matrix per band.
using BandFeatures = std::vector<Eigen::MatrixXd>;

// Encoder input for band b: rows ordered (channel, re|im, bin), T columns.
Eigen::MatrixXd band_input(const Spectrogram& x, int first_bin, int last_bin);

BandFeatures encode(const Spectrogram& x, const SeparatorModel& model);
std::pair<Eigen::VectorXd, Eigen::VectorXd> film(const Eigen::VectorXd& q,
                                                 const SeparatorModel& model);
BandFeatures condition(const BandFeatures& v, const Eigen::VectorXd& gamma,
                       const Eigen::VectorXd& beta);
Spectrogram decode(const BandFeatures& u, const SeparatorModel& model);

// Complex mask for mixture spectrogram `x` (already level-normalized).
Spectrogram estimate_mask(const Spectrogram& x, const Eigen::VectorXd& q,
                          const SeparatorModel& model);

// Full pipeline. `stft` must match the model's configuration.
SampleMatrix separate(const SampleMatrix& x, const Ellipsoid& query,
                      const SeparatorModel& model, const Stft& stft);
AudioChunk separate(const AudioChunk& x, const Ellipsoid& query,
                    const SeparatorModel& model);

// Sum of the stems whose embedding (row i of `embeddings`) lies in `query`.
SampleMatrix oracle_separate(const std::vector<const SampleMatrix*>& stems,
                             const Eigen::MatrixXd& embeddings,
                             const Ellipsoid& query,
                             std::vector<int>* members = nullptr);
AudioChunk oracle_separate(const std::vector<AudioChunk>& stems,
                           const Eigen::MatrixXd& embeddings,
                           const Ellipsoid& query);

inline constexpr double kLevelGuard = 1e-6;
inline double normalization_gain(const SampleMatrix& x) {
  return 1.0 / std::max(rms(x), kLevelGuard);
}

// Training objective for one example and, when `grad` is non-null, its
// gradient with respect to the flat parameters (size num_params()).
struct ExampleResult {
  LossReport loss;
  double snr_db = 0;
};
ExampleResult loss_and_gradient(const SeparatorModel& model,
                                const SampleMatrix& x, const SampleMatrix& y,
                                const Eigen::VectorXd& q, const Stft& stft,
                                const LossConfig& loss_cfg,
                                Eigen::VectorXd* grad);

// Checkpoint: magic "RSQMODL", version byte, dims, parameter count, float64
// parameters, then a length-prefixed free-form config echo.
inline constexpr char kModelMagic[7] = {'R', 'S', 'Q', 'M', 'O', 'D', 'L'};
inline constexpr uint8_t kModelVersion = 1;

void SaveModel(const std::filesystem::path& path, const SeparatorModel& model,
               const std::string& config_echo = "");
SeparatorModel LoadModel(const std::filesystem::path& path,
                         std::string* config_echo = nullptr);

}  // namespace regionsep

#endif  // REGIONSEP_SEPARATOR_H_
