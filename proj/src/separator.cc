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

#include "regionsep/separator.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "regionsep/query_precompute.h"

namespace regionsep {

void SeparatorDims::Validate() const {
  stft.Validate();
  if (channels < 1) throw std::invalid_argument("separator: channels must be >= 1");
  if (bands < 1 || bands > bins()) {
    throw std::invalid_argument("separator: band count must lie in [1, bins]");
  }
  if (embed_dim < 1 || film_hidden < 1 || dec_hidden < 1) {
    throw std::invalid_argument("separator: layer widths must be >= 1");
  }
  if (!(mask_bound > 0)) throw std::invalid_argument("separator: mask bound must be > 0");
}

std::vector<std::pair<int, int>> MakeBandMap(int bins, int bands) {
  if (bands < 1 || bands > bins) throw std::invalid_argument("band map: bad band count");
  const int width = bins / bands;
  std::vector<std::pair<int, int>> map;
  for (int b = 0; b < bands; ++b) {
    map.emplace_back(b * width, b + 1 == bands ? bins : (b + 1) * width);
  }
  return map;
}

SeparatorModel::SeparatorModel(const SeparatorDims& dims) : dims_(dims) {
  dims_.Validate();
  Build();
}

void SeparatorModel::Build() {
  bands_ = MakeBandMap(dims_.bins(), dims_.bands);
  Eigen::Index pos = 0;
  auto layer = [&pos](int rows, int cols, bool weight_norm) {
    Layout l;
    l.rows = rows;
    l.cols = cols;
    l.offset = pos;
    pos += static_cast<Eigen::Index>(rows) * cols;
    if (weight_norm) {
      l.g = pos;
      pos += rows;
    }
    l.bias = pos;
    pos += rows;
    return l;
  };
  const int d = dims_.embed_dim;
  enc_.clear();
  dec1_.clear();
  dec2_.clear();
  for (int b = 0; b < dims_.bands; ++b) enc_.push_back(layer(d, band_features(b), true));
  film1_ = layer(dims_.film_hidden, dims_.query_dim(), false);
  film2_ = layer(2 * d, dims_.film_hidden, false);
  for (int b = 0; b < dims_.bands; ++b) {
    dec1_.push_back(layer(dims_.dec_hidden, d, true));
    dec2_.push_back(layer(band_features(b), dims_.dec_hidden, true));
  }
  params_ = Eigen::VectorXd::Zero(pos);
}

WeightNormView SeparatorModel::WeightNormAt(const Layout& l) {
  return {Eigen::Map<RowMatrix>(params_.data() + l.offset, l.rows, l.cols),
          Eigen::Map<Eigen::VectorXd>(params_.data() + l.g, l.rows),
          Eigen::Map<Eigen::VectorXd>(params_.data() + l.bias, l.rows)};
}

LinearView SeparatorModel::LinearAt(const Layout& l) {
  return {Eigen::Map<RowMatrix>(params_.data() + l.offset, l.rows, l.cols),
          Eigen::Map<Eigen::VectorXd>(params_.data() + l.bias, l.rows)};
}

RowMatrix SeparatorModel::EffectiveWeight(const Layout& l) const {
  Eigen::Map<const RowMatrix> v(params_.data() + l.offset, l.rows, l.cols);
  if (l.g < 0) return v;
  Eigen::Map<const Eigen::VectorXd> g(params_.data() + l.g, l.rows);
  RowMatrix w(l.rows, l.cols);
  for (int i = 0; i < l.rows; ++i) w.row(i) = v.row(i) * (g[i] / v.row(i).norm());
  return w;
}

void SeparatorModel::Validate() const {
  if (!params_.allFinite()) throw std::invalid_argument("separator: non-finite parameters");
  auto check = [this](const Layout& l) {
    Eigen::Map<const RowMatrix> v(params_.data() + l.offset, l.rows, l.cols);
    for (int i = 0; i < l.rows; ++i) {
      if (!(v.row(i).norm() > 0)) {
        throw std::invalid_argument("separator: weight-norm direction with zero norm");
      }
    }
  };
  for (const auto& l : enc_) check(l);
  for (const auto& l : dec1_) check(l);
  for (const auto& l : dec2_) check(l);
}

SeparatorModel SeparatorModel::Initialize(const SeparatorDims& dims, uint64_t seed) {
  SeparatorModel m(dims);
  std::mt19937_64 rng(seed);
  auto fill = [&](auto&& mat, double scale) {
    for (Eigen::Index i = 0; i < mat.rows(); ++i) {
      for (Eigen::Index j = 0; j < mat.cols(); ++j) mat(i, j) = scale * StandardNormal(rng);
    }
  };
  const Eigen::VectorXd window = MakeWindow(dims.stft);
  const double enc_gain = 1.0 / std::sqrt(window.squaredNorm());
  for (int b = 0; b < dims.bands; ++b) {
    auto enc = m.encoder(b);
    fill(enc.v, 1.0);
    enc.g.setConstant(enc_gain);
  }
  auto f1 = m.film_hidden();
  fill(f1.w, 1.0 / std::sqrt(static_cast<double>(f1.w.cols())));
  auto f2 = m.film_out();
  fill(f2.w, 0.01);
  f2.bias.head(dims.embed_dim).setOnes();
  const double half_mask = std::atanh(0.5 / dims.mask_bound);
  for (int b = 0; b < dims.bands; ++b) {
    auto h = m.decoder_hidden(b);
    fill(h.v, 1.0);
    h.g.setOnes();
    auto o = m.decoder_out(b);
    fill(o.v, 1.0);
    o.g.setConstant(0.1);
    const int width = m.band_width(b);
    for (int c = 0; c < dims.channels; ++c) {
      o.bias.segment(2 * c * width, width).setConstant(half_mask);
    }
  }
  return m;
}

SeparatorModel SeparatorModel::AllOnes(const SeparatorDims& dims) {
  SeparatorModel m = Initialize(dims, 0);
  const double unit = std::atanh(1.0 / dims.mask_bound);
  for (int b = 0; b < dims.bands; ++b) {
    auto o = m.decoder_out(b);
    o.g.setZero();
    o.bias.setZero();
    const int width = m.band_width(b);
    for (int c = 0; c < dims.channels; ++c) {
      o.bias.segment(2 * c * width, width).setConstant(unit);
    }
  }
  return m;
}

Eigen::MatrixXd band_input(const Spectrogram& x, int first_bin, int last_bin) {
  const int n = last_bin - first_bin;
  Eigen::MatrixXd a(2 * x.channels() * n, x.frames());
  for (Eigen::Index c = 0; c < x.channels(); ++c) {
    const auto rows = x[c].middleRows(first_bin, n);
    a.middleRows((2 * c) * n, n) = rows.real();
    a.middleRows((2 * c + 1) * n, n) = rows.imag();
  }
  return a;
}

namespace {

void CheckSpectrogram(const Spectrogram& x, const SeparatorModel& model) {
  const SeparatorDims& d = model.dims();
  if (x.channels() != d.channels || x.bins() != d.bins()) {
    throw std::invalid_argument(
        "separator: spectrogram is " + std::to_string(x.channels()) + "x" +
        std::to_string(x.bins()) + ", model expects " +
        std::to_string(d.channels) + "x" + std::to_string(d.bins()));
  }
}

// Through the vectorized exp; libm's scalar tanh was a tenth of each step.
// (1 - t) / (1 + t) <= 1 exactly in floating point, so the mask bound holds.
Eigen::MatrixXd Tanh(const Eigen::MatrixXd& m) {
  const Eigen::ArrayXXd t = (-2.0 * m.array().abs()).exp();
  return (m.array().sign() * (1.0 - t) / (1.0 + t)).matrix();
}

// Activations kept for the backward pass.
struct BandCache {
  Eigen::MatrixXd a;  // encoder input (normalized)
  Eigen::MatrixXd v;  // encoder output
  Eigen::MatrixXd u;  // conditioned features
  Eigen::MatrixXd h;  // decoder hidden
  Eigen::MatrixXd m;  // bounded mask components
};

struct ForwardCache {
  std::vector<BandCache> bands;
  Eigen::VectorXd film_h;
  Eigen::VectorXd gamma, beta;
};

Eigen::MatrixXd EncodeBand(const Eigen::MatrixXd& a, const RowMatrix& w,
                           const Eigen::Ref<const Eigen::VectorXd>& bias) {
  Eigen::MatrixXd pre = w * a;
  pre.colwise() += bias;
  return Tanh(pre);
}

Eigen::MatrixXd ConditionBand(const Eigen::MatrixXd& v, const Eigen::VectorXd& gamma,
                              const Eigen::VectorXd& beta) {
  Eigen::MatrixXd u = (v.array().colwise() * gamma.array()).matrix();
  u.colwise() += beta;
  return u;
}

void DecodeBand(const Eigen::MatrixXd& u, const RowMatrix& w1,
                const Eigen::Ref<const Eigen::VectorXd>& b1, const RowMatrix& w2,
                const Eigen::Ref<const Eigen::VectorXd>& b2, double bound,
                Eigen::MatrixXd* h, Eigen::MatrixXd* m) {
  Eigen::MatrixXd pre = w1 * u;
  pre.colwise() += b1;
  *h = Tanh(pre);
  Eigen::MatrixXd out = w2 * *h;
  out.colwise() += b2;
  *m = bound * Tanh(out);
}

Eigen::Map<const Eigen::VectorXd> Bias(const SeparatorModel& model,
                                       const SeparatorModel::Layout& l) {
  return Eigen::Map<const Eigen::VectorXd>(model.params().data() + l.bias, l.rows);
}

// Writes band mask components into the mask spectrogram.
void ScatterMask(const Eigen::MatrixXd& m, int first_bin, int width,
                 Spectrogram* mask) {
  for (Eigen::Index c = 0; c < mask->channels(); ++c) {
    (*mask)[c].middleRows(first_bin, width).real() = m.middleRows(2 * c * width, width);
    (*mask)[c].middleRows(first_bin, width).imag() =
        m.middleRows((2 * c + 1) * width, width);
  }
}

Spectrogram RunForward(const Spectrogram& x, double gain, const Eigen::VectorXd& q,
                       const SeparatorModel& model, ForwardCache* cache) {
  CheckSpectrogram(x, model);
  const SeparatorDims& d = model.dims();
  auto [gamma, beta] = film(q, model);
  Spectrogram mask = Spectrogram::Zeros(x.channels(), x.bins(), x.frames(), d.stft);
  if (cache != nullptr) cache->bands.resize(d.bands);
  for (int b = 0; b < d.bands; ++b) {
    const auto [lo, hi] = model.band_map()[b];
    BandCache local;
    BandCache& bc = cache != nullptr ? cache->bands[b] : local;
    bc.a = band_input(x, lo, hi) * gain;
    bc.v = EncodeBand(bc.a, model.EncoderWeight(b), Bias(model, model.encoder_layout()[b]));
    bc.u = ConditionBand(bc.v, gamma, beta);
    DecodeBand(bc.u, model.DecoderHiddenWeight(b),
               Bias(model, model.decoder_hidden_layout()[b]), model.DecoderOutWeight(b),
               Bias(model, model.decoder_out_layout()[b]), d.mask_bound, &bc.h, &bc.m);
    ScatterMask(bc.m, lo, hi - lo, &mask);
  }
  if (cache != nullptr) {
    const auto& l = model.film_hidden_layout();
    Eigen::Map<const RowMatrix> w(model.params().data() + l.offset, l.rows, l.cols);
    cache->film_h = (w * q + Bias(model, l)).array().tanh().matrix();
    cache->gamma = gamma;
    cache->beta = beta;
  }
  return mask;
}

Spectrogram ApplyMask(const Spectrogram& mask, const Spectrogram& x) {
  Spectrogram y = x;
  for (Eigen::Index c = 0; c < x.channels(); ++c) {
    y[c] = mask[c].cwiseProduct(x[c]);
  }
  return y;
}

void CheckQuery(const Ellipsoid& query, const SeparatorModel& model) {
  if (query.dim() != model.dims().embed_dim) {
    throw std::invalid_argument("separator: query dimension " +
                                std::to_string(query.dim()) + " but model expects " +
                                std::to_string(model.dims().embed_dim));
  }
  query.Validate();
}

void CheckStft(const Stft& stft, const SeparatorModel& model) {
  const StftConfig& a = stft.config();
  const StftConfig& b = model.dims().stft;
  if (a.fft_size != b.fft_size || a.hop != b.hop || a.window != b.window) {
    throw std::invalid_argument("separator: stft configuration does not match model");
  }
}

// Accumulates the weight-norm gradient of one layer given dL/dW (effective).
void WeightNormBackward(const SeparatorModel& model, const SeparatorModel::Layout& l,
                        const Eigen::MatrixXd& dw, const Eigen::VectorXd& dbias,
                        Eigen::VectorXd* grad) {
  Eigen::Map<const RowMatrix> v(model.params().data() + l.offset, l.rows, l.cols);
  Eigen::Map<RowMatrix> gv(grad->data() + l.offset, l.rows, l.cols);
  for (int i = 0; i < l.rows; ++i) {
    const double norm = v.row(i).norm();
    const Eigen::RowVectorXd vhat = v.row(i) / norm;
    const double dg = dw.row(i).dot(vhat);
    const double g = model.params()[l.g + i];
    gv.row(i) += (g / norm) * (dw.row(i) - dg * vhat);
    (*grad)[l.g + i] += dg;
  }
  grad->segment(l.bias, l.rows) += dbias;
}

void LinearBackward(const SeparatorModel::Layout& l, const Eigen::MatrixXd& dw,
                    const Eigen::VectorXd& dbias, Eigen::VectorXd* grad) {
  Eigen::Map<RowMatrix>(grad->data() + l.offset, l.rows, l.cols) += dw;
  grad->segment(l.bias, l.rows) += dbias;
}

}  // namespace

BandFeatures encode(const Spectrogram& x, const SeparatorModel& model) {
  CheckSpectrogram(x, model);
  BandFeatures v;
  for (int b = 0; b < model.dims().bands; ++b) {
    const auto [lo, hi] = model.band_map()[b];
    v.push_back(EncodeBand(band_input(x, lo, hi), model.EncoderWeight(b),
                           Bias(model, model.encoder_layout()[b])));
  }
  return v;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> film(const Eigen::VectorXd& q,
                                                 const SeparatorModel& model) {
  const int d = model.dims().embed_dim;
  if (q.size() != model.dims().query_dim()) {
    throw std::invalid_argument("film: query vector has length " +
                                std::to_string(q.size()) + ", expected " +
                                std::to_string(model.dims().query_dim()));
  }
  const auto& l1 = model.film_hidden_layout();
  const auto& l2 = model.film_out_layout();
  Eigen::Map<const RowMatrix> w1(model.params().data() + l1.offset, l1.rows, l1.cols);
  Eigen::Map<const RowMatrix> w2(model.params().data() + l2.offset, l2.rows, l2.cols);
  const Eigen::VectorXd h = (w1 * q + Bias(model, l1)).array().tanh().matrix();
  const Eigen::VectorXd o = w2 * h + Bias(model, l2);
  return {o.head(d), o.tail(d)};
}

BandFeatures condition(const BandFeatures& v, const Eigen::VectorXd& gamma,
                       const Eigen::VectorXd& beta) {
  BandFeatures u;
  u.reserve(v.size());
  for (const auto& vb : v) {
    if (vb.rows() != gamma.size() || vb.rows() != beta.size()) {
      throw std::invalid_argument("condition: FiLM parameters do not match D");
    }
    u.push_back(ConditionBand(vb, gamma, beta));
  }
  return u;
}

Spectrogram decode(const BandFeatures& u, const SeparatorModel& model) {
  const SeparatorDims& d = model.dims();
  if (static_cast<int>(u.size()) != d.bands) {
    throw std::invalid_argument("decode: expected one feature block per band");
  }
  const Eigen::Index frames = u.front().cols();
  Spectrogram mask = Spectrogram::Zeros(d.channels, d.bins(), frames, d.stft);
  for (int b = 0; b < d.bands; ++b) {
    if (u[b].rows() != d.embed_dim || u[b].cols() != frames) {
      throw std::invalid_argument("decode: feature block shape mismatch");
    }
    Eigen::MatrixXd h, m;
    DecodeBand(u[b], model.DecoderHiddenWeight(b),
               Bias(model, model.decoder_hidden_layout()[b]), model.DecoderOutWeight(b),
               Bias(model, model.decoder_out_layout()[b]), d.mask_bound, &h, &m);
    const auto [lo, hi] = model.band_map()[b];
    ScatterMask(m, lo, hi - lo, &mask);
  }
  return mask;
}

Spectrogram estimate_mask(const Spectrogram& x, const Eigen::VectorXd& q,
                          const SeparatorModel& model) {
  return RunForward(x, 1.0, q, model, nullptr);
}

SampleMatrix separate(const SampleMatrix& x, const Ellipsoid& query,
                      const SeparatorModel& model, const Stft& stft) {
  CheckStft(stft, model);
  CheckQuery(query, model);
  if (x.rows() != model.dims().channels) {
    throw std::invalid_argument("separate: input has " + std::to_string(x.rows()) +
                                " channels, model expects " +
                                std::to_string(model.dims().channels));
  }
  const double gain = normalization_gain(x);
  const Spectrogram spec = stft.Forward(x);
  const Spectrogram mask = RunForward(spec, gain, to_query_vector(query), model, nullptr);
  return stft.Inverse(ApplyMask(mask, spec), x.cols());
}

AudioChunk separate(const AudioChunk& x, const Ellipsoid& query,
                    const SeparatorModel& model) {
  x.Validate();
  const Stft stft(model.dims().stft);
  return {separate(x.samples, query, model, stft), x.sample_rate};
}

SampleMatrix oracle_separate(const std::vector<const SampleMatrix*>& stems,
                             const Eigen::MatrixXd& embeddings,
                             const Ellipsoid& query, std::vector<int>* members) {
  if (stems.empty()) throw std::invalid_argument("oracle_separate: no stems");
  if (embeddings.rows() != static_cast<Eigen::Index>(stems.size())) {
    throw std::invalid_argument("oracle_separate: one embedding per stem required");
  }
  SampleMatrix y = SampleMatrix::Zero(stems.front()->rows(), stems.front()->cols());
  if (members != nullptr) members->clear();
  for (size_t i = 0; i < stems.size(); ++i) {
    if (stems[i]->rows() != y.rows() || stems[i]->cols() != y.cols()) {
      throw std::invalid_argument("oracle_separate: stem " + std::to_string(i) +
                                  " shape differs");
    }
    if (contains(query, embeddings.row(static_cast<Eigen::Index>(i)).transpose())) {
      y += *stems[i];
      if (members != nullptr) members->push_back(static_cast<int>(i));
    }
  }
  return y;
}

AudioChunk oracle_separate(const std::vector<AudioChunk>& stems,
                           const Eigen::MatrixXd& embeddings,
                           const Ellipsoid& query) {
  std::vector<const SampleMatrix*> ptrs;
  for (const auto& s : stems) ptrs.push_back(&s.samples);
  if (stems.empty()) throw std::invalid_argument("oracle_separate: no stems");
  return {oracle_separate(ptrs, embeddings, query), stems.front().sample_rate};
}

ExampleResult loss_and_gradient(const SeparatorModel& model, const SampleMatrix& x,
                                const SampleMatrix& y, const Eigen::VectorXd& q,
                                const Stft& stft, const LossConfig& loss_cfg,
                                Eigen::VectorXd* grad) {
  CheckStft(stft, model);
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw std::invalid_argument("loss_and_gradient: mixture and target differ in shape");
  }
  const SeparatorDims& d = model.dims();
  const double gain = normalization_gain(x);
  const Spectrogram spec = stft.Forward(x);
  ForwardCache cache;
  const Spectrogram mask = RunForward(spec, gain, q, model, grad ? &cache : nullptr);
  const SampleMatrix est = stft.Inverse(ApplyMask(mask, spec), x.cols());

  ExampleResult result;
  SampleMatrix d_est;
  result.loss = total_loss(est, y, stft, loss_cfg, grad ? &d_est : nullptr);
  result.snr_db = snr(est, y);
  if (grad == nullptr) return result;

  grad->setZero(model.num_params());
  const Spectrogram d_out = stft.InverseAdjoint(d_est, spec.frames());
  Eigen::VectorXd d_gamma = Eigen::VectorXd::Zero(d.embed_dim);
  Eigen::VectorXd d_beta = Eigen::VectorXd::Zero(d.embed_dim);
  for (int b = 0; b < d.bands; ++b) {
    const auto [lo, hi] = model.band_map()[b];
    const int width = hi - lo;
    BandCache& bc = cache.bands[b];
    // dL/dM = dL/dY * conj(X), packed as re/im rows like the mask.
    Eigen::MatrixXd dm(bc.m.rows(), bc.m.cols());
    for (int c = 0; c < d.channels; ++c) {
      const Eigen::MatrixXcd dmc =
          d_out[c].middleRows(lo, width).cwiseProduct(spec[c].middleRows(lo, width).conjugate());
      dm.middleRows(2 * c * width, width) = dmc.real();
      dm.middleRows((2 * c + 1) * width, width) = dmc.imag();
    }
    const Eigen::MatrixXd d_o =
        (dm.array() * (d.mask_bound - bc.m.array().square() / d.mask_bound)).matrix();
    const RowMatrix w2 = model.DecoderOutWeight(b);
    WeightNormBackward(model, model.decoder_out_layout()[b], d_o * bc.h.transpose(),
                       d_o.rowwise().sum(), grad);
    const Eigen::MatrixXd d_p1 =
        ((w2.transpose() * d_o).array() * (1.0 - bc.h.array().square())).matrix();
    const RowMatrix w1 = model.DecoderHiddenWeight(b);
    WeightNormBackward(model, model.decoder_hidden_layout()[b], d_p1 * bc.u.transpose(),
                       d_p1.rowwise().sum(), grad);
    const Eigen::MatrixXd d_u = w1.transpose() * d_p1;
    d_gamma += d_u.cwiseProduct(bc.v).rowwise().sum();
    d_beta += d_u.rowwise().sum();
    const Eigen::MatrixXd d_pe =
        ((d_u.array().colwise() * cache.gamma.array()) * (1.0 - bc.v.array().square()))
            .matrix();
    WeightNormBackward(model, model.encoder_layout()[b], d_pe * bc.a.transpose(),
                       d_pe.rowwise().sum(), grad);
  }
  const auto& l1 = model.film_hidden_layout();
  const auto& l2 = model.film_out_layout();
  Eigen::VectorXd d_o(2 * d.embed_dim);
  d_o << d_gamma, d_beta;
  Eigen::Map<const RowMatrix> f2(model.params().data() + l2.offset, l2.rows, l2.cols);
  LinearBackward(l2, d_o * cache.film_h.transpose(), d_o, grad);
  const Eigen::VectorXd d_p =
      ((f2.transpose() * d_o).array() * (1.0 - cache.film_h.array().square())).matrix();
  LinearBackward(l1, d_p * q.transpose(), d_p, grad);
  return result;
}

namespace {

template <typename T>
void Put(std::string* out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out->append(buf, sizeof(T));
}

template <typename T>
T Take(const std::string& in, size_t* pos, const std::string& what) {
  if (*pos + sizeof(T) > in.size()) {
    throw std::runtime_error("model checkpoint truncated reading " + what);
  }
  T v;
  std::memcpy(&v, in.data() + *pos, sizeof(T));
  *pos += sizeof(T);
  return v;
}

}  // namespace

// Host byte order is assumed little-endian.
void SaveModel(const std::filesystem::path& path, const SeparatorModel& model,
               const std::string& config_echo) {
  const SeparatorDims& d = model.dims();
  std::string out(kModelMagic, sizeof(kModelMagic));
  Put<uint8_t>(&out, kModelVersion);
  for (int32_t v : {d.channels, d.stft.fft_size, d.stft.hop,
                    static_cast<int32_t>(d.stft.window), d.bands, d.embed_dim,
                    d.film_hidden, d.dec_hidden}) {
    Put<int32_t>(&out, v);
  }
  Put<double>(&out, d.mask_bound);
  Put<uint64_t>(&out, static_cast<uint64_t>(model.num_params()));
  out.append(reinterpret_cast<const char*>(model.params().data()),
             sizeof(double) * model.params().size());
  Put<uint32_t>(&out, static_cast<uint32_t>(config_echo.size()));
  out += config_echo;
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
  }
  std::filesystem::rename(tmp, path);
}

SeparatorModel LoadModel(const std::filesystem::path& path, std::string* config_echo) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open model " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string in = ss.str();
  size_t pos = 0;
  if (in.size() < sizeof(kModelMagic) ||
      std::memcmp(in.data(), kModelMagic, sizeof(kModelMagic)) != 0) {
    throw std::runtime_error(path.string() + ": not a model checkpoint");
  }
  pos = sizeof(kModelMagic);
  const auto version = Take<uint8_t>(in, &pos, "version");
  if (version != kModelVersion) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  SeparatorDims d;
  d.channels = Take<int32_t>(in, &pos, "dims");
  d.stft.fft_size = Take<int32_t>(in, &pos, "dims");
  d.stft.hop = Take<int32_t>(in, &pos, "dims");
  d.stft.window = static_cast<Window>(Take<int32_t>(in, &pos, "dims"));
  d.bands = Take<int32_t>(in, &pos, "dims");
  d.embed_dim = Take<int32_t>(in, &pos, "dims");
  d.film_hidden = Take<int32_t>(in, &pos, "dims");
  d.dec_hidden = Take<int32_t>(in, &pos, "dims");
  d.mask_bound = Take<double>(in, &pos, "dims");
  SeparatorModel model(d);
  const auto count = Take<uint64_t>(in, &pos, "parameter count");
  if (count != static_cast<uint64_t>(model.num_params())) {
    throw std::runtime_error(path.string() + ": parameter count " + std::to_string(count) +
                             " does not match dims (" +
                             std::to_string(model.num_params()) + ")");
  }
  const size_t bytes = sizeof(double) * count;
  if (pos + bytes > in.size()) throw std::runtime_error(path.string() + ": truncated");
  std::memcpy(model.params().data(), in.data() + pos, bytes);
  pos += bytes;
  const auto echo_len = Take<uint32_t>(in, &pos, "config echo");
  if (pos + echo_len > in.size()) throw std::runtime_error(path.string() + ": truncated");
  if (config_echo != nullptr) *config_echo = in.substr(pos, echo_len);
  model.Validate();
  return model;
}

}  // namespace regionsep
