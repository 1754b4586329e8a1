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

#include "regionsep/loss.h"

#include <algorithm>

namespace regionsep {
namespace {

void CheckSpectra(const Spectrogram& a, const Spectrogram& b) {
  if (a.channels() != b.channels() || a.bins() != b.bins() ||
      a.frames() != b.frames()) {
    throw std::invalid_argument("reconstruction loss: spectrogram shape mismatch");
  }
}

struct SpectralL1 {
  double err_re = 0, err_im = 0, mag_re = 0, mag_im = 0;
};

SpectralL1 SpectralSums(const Spectrogram& est, const Spectrogram& ref) {
  SpectralL1 s;
  for (Eigen::Index c = 0; c < est.channels(); ++c) {
    const Eigen::MatrixXcd diff = est[c] - ref[c];
    s.err_re += diff.real().cwiseAbs().sum();
    s.err_im += diff.imag().cwiseAbs().sum();
    s.mag_re += ref[c].real().cwiseAbs().sum();
    s.mag_im += ref[c].imag().cwiseAbs().sum();
  }
  return s;
}

double Sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

ReconstructionTerms reconstruction_loss(const SampleMatrix& est_audio,
                                        const SampleMatrix& ref_audio,
                                        const Spectrogram& est_spec,
                                        const Spectrogram& ref_spec,
                                        double eps) {
  CheckSpectra(est_spec, ref_spec);
  ReconstructionTerms t;
  t.time = l1snr(est_audio, ref_audio, eps);
  const SpectralL1 s = SpectralSums(est_spec, ref_spec);
  t.real = 10.0 * std::log10((s.err_re + eps) / (s.mag_re + eps));
  t.imag = 10.0 * std::log10((s.err_im + eps) / (s.mag_im + eps));
  return t;
}

SampleMatrix reconstruction_loss_gradient(const SampleMatrix& est_audio,
                                          const SampleMatrix& ref_audio,
                                          const Spectrogram& est_spec,
                                          const Spectrogram& ref_spec,
                                          const Stft& stft, double eps) {
  CheckSpectra(est_spec, ref_spec);
  SampleMatrix grad = l1snr_gradient(est_audio, ref_audio, eps);
  const SpectralL1 s = SpectralSums(est_spec, ref_spec);
  const double scale_re = kTenOverLn10 / (s.err_re + eps);
  const double scale_im = kTenOverLn10 / (s.err_im + eps);
  Spectrogram g = Spectrogram::Zeros(est_spec.channels(), est_spec.bins(),
                                     est_spec.frames(), stft.config());
  for (Eigen::Index c = 0; c < est_spec.channels(); ++c) {
    const Eigen::MatrixXcd diff = est_spec[c] - ref_spec[c];
    g[c] = diff.unaryExpr([&](const std::complex<double>& v) {
      return std::complex<double>(scale_re * Sign(v.real()),
                                  scale_im * Sign(v.imag()));
    });
  }
  grad += stft.ForwardAdjoint(g, est_audio.cols());
  return grad;
}

LevelTerms level_regularizer(const SampleMatrix& est, const SampleMatrix& ref) {
  if (est.rows() != ref.rows() || est.cols() != ref.cols()) {
    throw std::invalid_argument("level regularizer: shape mismatch");
  }
  LevelTerms t;
  t.level_est = dbrms(est);
  t.level_ref = dbrms(ref);
  t.reg = std::abs(t.level_est - t.level_ref);
  return t;
}

SampleMatrix level_regularizer_gradient(const SampleMatrix& est,
                                        const SampleMatrix& ref) {
  const LevelTerms t = level_regularizer(est, ref);
  const double energy = est.squaredNorm();
  const double mean_square = energy / static_cast<double>(est.size());
  if (!(mean_square > 0.0) || 10.0 * std::log10(mean_square) <= kDbFloor) {
    return SampleMatrix::Zero(est.rows(), est.cols());
  }
  const double sign = Sign(t.level_est - t.level_ref);
  return est * (sign * 2.0 * kTenOverLn10 / energy);
}

AdaptiveWeight adaptive_weight(double level_ref, double level_est,
                               const LossConfig& cfg) {
  AdaptiveWeight w;
  w.eta = level_ref > std::max(level_est, cfg.l_min) ? 1 : 0;
  w.weight = cfg.lambda0;
  if (w.eta == 1) {
    const double reg = std::abs(level_est - level_ref);
    const double ratio = std::clamp(reg / (level_ref - cfg.l_min), 0.0, 1.0);
    w.weight += cfg.delta_lambda * ratio;
  }
  return w;
}

LossReport total_loss(const SampleMatrix& est, const SampleMatrix& ref,
                      const Spectrogram& ref_spec, const Stft& stft,
                      const LossConfig& cfg, SampleMatrix* grad) {
  cfg.Validate();
  const Spectrogram est_spec = stft.Forward(est);
  const ReconstructionTerms recon =
      reconstruction_loss(est, ref, est_spec, ref_spec, cfg.eps_l1snr);
  const LevelTerms level = level_regularizer(est, ref);
  const AdaptiveWeight w = adaptive_weight(level.level_ref, level.level_est, cfg);

  LossReport r;
  r.recon = recon.total();
  r.reg = level.reg;
  r.weight = w.weight;
  r.eta = w.eta;
  r.total = r.recon + r.weight * r.reg;
  r.level_ref = level.level_ref;
  r.level_est = level.level_est;
  if (grad != nullptr) {
    *grad = reconstruction_loss_gradient(est, ref, est_spec, ref_spec, stft,
                                         cfg.eps_l1snr);
    if (r.weight != 0.0) *grad += r.weight * level_regularizer_gradient(est, ref);
  }
  return r;
}

LossReport total_loss(const SampleMatrix& est, const SampleMatrix& ref,
                      const Stft& stft, const LossConfig& cfg,
                      SampleMatrix* grad) {
  return total_loss(est, ref, stft.Forward(ref), stft, cfg, grad);
}

}  // namespace regionsep
