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

#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "oracles.h"
#include "regionsep/loss.h"

namespace regionsep {
namespace {

const StftConfig kSmall{64, 16, Window::kHann};
constexpr Eigen::Index kLen = 256;

SampleMatrix Noise(double scale, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0, scale);
  SampleMatrix x(2, kLen);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  return x;
}

Eigen::VectorXd Flat(const SampleMatrix& x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
}

SampleMatrix Unflat(const Eigen::VectorXd& v) {
  SampleMatrix x(2, kLen);
  std::copy(v.data(), v.data() + v.size(), x.data());
  return x;
}

// Compares an analytic gradient against central differences on 64 evenly
// spaced coordinates.
void ExpectGradient(const std::function<double(const SampleMatrix&)>& f,
                    const SampleMatrix& x, const SampleMatrix& grad, double tol = 1e-4) {
  const Eigen::VectorXd x0 = Flat(x);
  const Eigen::VectorXd g = Flat(grad);
  auto fv = [&](const Eigen::VectorXd& v) { return f(Unflat(v)); };
  for (int k = 0; k < 64; ++k) {
    const Eigen::Index i = k * (x0.size() / 64) + k % 7;
    const double fd = oracle::CentralDifference(fv, x0, i, 1e-7);
    EXPECT_LT(oracle::RelativeError(g[i], fd, 1e-3), tol) << "coordinate " << i;
  }
}

TEST(L1SnrTest, Values) {
  const SampleMatrix ref = SampleMatrix::Constant(2, 4, 1.0);
  EXPECT_NEAR(l1snr(ref, ref, 1e-3), 10 * std::log10(1e-3 / (8 + 1e-3)), 1e-12);
  const SampleMatrix est = SampleMatrix::Zero(2, 4);
  EXPECT_NEAR(l1snr(est, ref, 1e-3), 0.0, 1e-12);
  EXPECT_THROW(l1snr(SampleMatrix::Zero(2, 3), ref, 1e-3), std::invalid_argument);
}

TEST(L1SnrTest, GradientMatchesFiniteDifference) {
  const SampleMatrix ref = Noise(0.3, 1);
  const SampleMatrix est = Noise(0.3, 2);
  ExpectGradient([&](const SampleMatrix& e) { return l1snr(e, ref, 1e-3); }, est,
                 l1snr_gradient(est, ref, 1e-3));
}

TEST(ReconstructionLossTest, GradientMatchesFiniteDifference) {
  const Stft stft(kSmall);
  const SampleMatrix ref = Noise(0.3, 3);
  const SampleMatrix est = ref + Noise(0.1, 4);
  const Spectrogram ref_spec = stft.Forward(ref);
  auto f = [&](const SampleMatrix& e) {
    return reconstruction_loss(e, ref, stft.Forward(e), ref_spec).total();
  };
  ExpectGradient(f, est,
                 reconstruction_loss_gradient(est, ref, stft.Forward(est), ref_spec, stft));
}

TEST(ReconstructionLossTest, PerfectEstimate) {
  const Stft stft(kSmall);
  const SampleMatrix ref = Noise(0.3, 5);
  const Spectrogram s = stft.Forward(ref);
  const ReconstructionTerms t = reconstruction_loss(ref, ref, s, s);
  EXPECT_NEAR(t.time, 10 * std::log10(1e-3 / (ref.cwiseAbs().sum() + 1e-3)), 1e-12);
  EXPECT_LT(t.real, -40.0);
  EXPECT_LT(t.imag, -40.0);
}

TEST(LevelRegularizerTest, ValueAndGradient) {
  const SampleMatrix ref = Noise(0.3, 6);
  const SampleMatrix est = Noise(0.05, 7);
  const LevelTerms t = level_regularizer(est, ref);
  EXPECT_NEAR(t.reg, std::abs(dbrms(est) - dbrms(ref)), 1e-12);
  ExpectGradient([&](const SampleMatrix& e) { return level_regularizer(e, ref).reg; }, est,
                 level_regularizer_gradient(est, ref));
  EXPECT_EQ(level_regularizer_gradient(SampleMatrix::Zero(2, kLen), ref).cwiseAbs().maxCoeff(),
            0.0);
}

TEST(AdaptiveWeightTest, Cases) {
  const LossConfig cfg;
  // Estimate at least as loud as the reference: base weight only.
  AdaptiveWeight w = adaptive_weight(-20, -10, cfg);
  EXPECT_EQ(w.eta, 0);
  EXPECT_EQ(w.weight, cfg.lambda0);
  // Reference below the floor: no boost even though the estimate is quieter.
  w = adaptive_weight(-50, -70, cfg);
  EXPECT_EQ(w.eta, 0);
  // Interior of the clamp.
  w = adaptive_weight(-18, -28, cfg);
  EXPECT_EQ(w.eta, 1);
  EXPECT_NEAR(w.weight, cfg.lambda0 + cfg.delta_lambda * 10.0 / 30.0, 1e-15);
  // Saturated.
  w = adaptive_weight(-18, -120, cfg);
  EXPECT_NEAR(w.weight, cfg.lambda0 + cfg.delta_lambda, 1e-15);
  w = adaptive_weight(-18, -18, cfg);
  EXPECT_EQ(w.eta, 0);
}

TEST(TotalLossTest, GradientHoldsWeightConstant) {
  const Stft stft(kSmall);
  const LossConfig cfg;
  const SampleMatrix ref = Noise(0.3, 8);
  const SampleMatrix est = 0.2 * ref + Noise(0.02, 9);
  SampleMatrix grad;
  const LossReport r = total_loss(est, ref, stft, cfg, &grad);
  ASSERT_EQ(r.eta, 1);
  ASSERT_GT(r.weight, cfg.lambda0);
  ASSERT_LT(r.weight, cfg.lambda0 + cfg.delta_lambda);
  EXPECT_NEAR(r.total, r.recon + r.weight * r.reg, 1e-12);

  const Spectrogram ref_spec = stft.Forward(ref);
  auto frozen = [&](const SampleMatrix& e) {
    return reconstruction_loss(e, ref, stft.Forward(e), ref_spec).total() +
           r.weight * level_regularizer(e, ref).reg;
  };
  ExpectGradient(frozen, est, grad);

  // Differentiating through the weight gives a different vector.
  const Eigen::VectorXd x0 = Flat(est);
  auto full = [&](const Eigen::VectorXd& v) { return total_loss(Unflat(v), ref, stft, cfg).total; };
  double num = 0, den = 0;
  for (int k = 0; k < 64; ++k) {
    const Eigen::Index i = k * (x0.size() / 64);
    const double fd = oracle::CentralDifference(full, x0, i, 1e-7);
    num += (fd - Flat(grad)[i]) * (fd - Flat(grad)[i]);
    den += fd * fd;
  }
  EXPECT_GT(std::sqrt(num / den), 1e-3);
}

}  // namespace
}  // namespace regionsep
