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

// Training objective: a three-domain L1SNR reconstruction term plus an
// adaptively weighted level-matching penalty. The weight is held constant when
// differentiating (stop-gradient).

#ifndef REGIONSEP_LOSS_H_
#define REGIONSEP_LOSS_H_

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "regionsep/signal.h"

namespace regionsep {

struct LossConfig {
  double eps_l1snr = 1e-3;
  double lambda0 = 0.01;
  double delta_lambda = 0.1;
  double l_min = -48.0;

  void Validate() const {
    if (!(eps_l1snr > 0)) throw std::invalid_argument("loss: eps must be > 0");
    if (!(lambda0 >= 0) || !(delta_lambda >= 0)) {
      throw std::invalid_argument("loss: weights must be non-negative");
    }
  }
};

struct LossReport {
  double recon = 0;   // L
  double reg = 0;     // R
  double weight = 0;  // lambda
  int eta = 0;
  double total = 0;   // L + lambda R
  double level_ref = 0;
  double level_est = 0;
};

inline constexpr double kTenOverLn10 = 10.0 / std::numbers::ln10;

// 10 log10((|vec(est - ref)|_1 + eps) / (|vec(ref)|_1 + eps)).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar l1snr(const Eigen::DenseBase<DerivedA>& est,
                                const Eigen::DenseBase<DerivedB>& ref,
                                typename DerivedA::Scalar eps = 1e-3) {
  using Scalar = typename DerivedA::Scalar;
  if (est.rows() != ref.rows() || est.cols() != ref.cols()) {
    throw std::invalid_argument("l1snr: shape mismatch");
  }
  const Scalar err = (est.derived() - ref.derived()).cwiseAbs().sum();
  const Scalar mag = ref.derived().cwiseAbs().sum();
  return Scalar(10) * std::log10((err + eps) / (mag + eps));
}

// Gradient of l1snr with respect to `est`; zero subgradient at ties.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic,
              DerivedA::IsRowMajor ? Eigen::RowMajor : Eigen::ColMajor>
l1snr_gradient(const Eigen::DenseBase<DerivedA>& est,
               const Eigen::DenseBase<DerivedB>& ref,
               typename DerivedA::Scalar eps = 1e-3) {
  using Scalar = typename DerivedA::Scalar;
  if (est.rows() != ref.rows() || est.cols() != ref.cols()) {
    throw std::invalid_argument("l1snr: shape mismatch");
  }
  const auto diff = (est.derived() - ref.derived()).eval();
  const Scalar err = diff.cwiseAbs().sum();
  return diff.unaryExpr([](Scalar v) {
               return v > 0 ? Scalar(1) : (v < 0 ? Scalar(-1) : Scalar(0));
             }) *
         (Scalar(kTenOverLn10) / (err + eps));
}

struct ReconstructionTerms {
  double time = 0;
  double real = 0;
  double imag = 0;
  double total() const { return time + real + imag; }
};

ReconstructionTerms reconstruction_loss(const SampleMatrix& est_audio,
                                        const SampleMatrix& ref_audio,
                                        const Spectrogram& est_spec,
                                        const Spectrogram& ref_spec,
                                        double eps = 1e-3);

// dL/d est_audio, with est_spec = stft.Forward(est_audio).
SampleMatrix reconstruction_loss_gradient(const SampleMatrix& est_audio,
                                          const SampleMatrix& ref_audio,
                                          const Spectrogram& est_spec,
                                          const Spectrogram& ref_spec,
                                          const Stft& stft, double eps = 1e-3);

struct LevelTerms {
  double reg = 0;        // |L_est - L_ref|
  double level_ref = 0;  // L
  double level_est = 0;  // L_hat
};

LevelTerms level_regularizer(const SampleMatrix& est, const SampleMatrix& ref);
// dR/d est. Zero where the estimate sits at the level floor or R = 0.
SampleMatrix level_regularizer_gradient(const SampleMatrix& est,
                                        const SampleMatrix& ref);

struct AdaptiveWeight {
  double weight = 0;
  int eta = 0;
};

// lambda0 + eta * delta_lambda * clamp(R / (L - L_min), 0, 1) with
// eta = [L > max(L_hat, L_min)].
AdaptiveWeight adaptive_weight(double level_ref, double level_est,
                               const LossConfig& cfg);

// J = L + sg[lambda] R. When `grad` is non-null it receives dJ/d est with
// lambda held constant. est_spec/ref_spec are recomputed from the audio.
LossReport total_loss(const SampleMatrix& est, const SampleMatrix& ref,
                      const Stft& stft, const LossConfig& cfg,
                      SampleMatrix* grad = nullptr);

// Variant taking a precomputed reference spectrogram.
LossReport total_loss(const SampleMatrix& est, const SampleMatrix& ref,
                      const Spectrogram& ref_spec, const Stft& stft,
                      const LossConfig& cfg, SampleMatrix* grad = nullptr);

}  // namespace regionsep

#endif  // REGIONSEP_LOSS_H_
