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
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "regionsep/signal.h"
#include "regionsep/wav.h"

namespace regionsep {
namespace {

SampleMatrix RandomSignal(Eigen::Index c, Eigen::Index n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 0.3);
  SampleMatrix x(c, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  return x;
}

double RealDot(const Spectrogram& a, const Spectrogram& b) {
  double s = 0;
  for (Eigen::Index c = 0; c < a.channels(); ++c) {
    s += (a[c].real().array() * b[c].real().array()).sum() +
         (a[c].imag().array() * b[c].imag().array()).sum();
  }
  return s;
}

Spectrogram RandomSpectrogram(Eigen::Index c, Eigen::Index t, const StftConfig& cfg,
                              uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Spectrogram s = Spectrogram::Zeros(c, cfg.bins(), t, cfg);
  for (Eigen::Index ch = 0; ch < c; ++ch) {
    for (Eigen::Index i = 0; i < s[ch].size(); ++i) {
      s[ch].data()[i] = {nd(rng), nd(rng)};
    }
  }
  return s;
}

TEST(StftConfigTest, FrameCount) {
  StftConfig cfg;
  EXPECT_EQ(cfg.frames_for(1023), 0);
  EXPECT_EQ(cfg.frames_for(1024), 1);
  EXPECT_EQ(cfg.frames_for(1024 + 255), 1);
  EXPECT_EQ(cfg.frames_for(1024 + 256), 2);
  EXPECT_EQ(cfg.frames_for(160000), (160000 - 1024) / 256 + 1);
}

TEST(StftConfigTest, RejectsBadConfigurations) {
  StftConfig odd{1023, 256, Window::kHann};
  EXPECT_THROW(odd.Validate(), std::invalid_argument);
  StftConfig wide{1024, 2048, Window::kHann};
  EXPECT_THROW(wide.Validate(), std::invalid_argument);
  StftConfig non_cola{1024, 300, Window::kHann};
  EXPECT_THROW(non_cola.Validate(), std::invalid_argument);
  StftConfig sqrt_hann{512, 256, Window::kSqrtHann};
  EXPECT_NO_THROW(sqrt_hann.Validate());
}

TEST(StftTest, TooShortChunkIsRejected) {
  Stft stft(StftConfig{});
  try {
    stft.Forward(SampleMatrix::Zero(2, 1000));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("chunk too short"), std::string::npos);
  }
}

TEST(StftTest, ZeroInZeroOut) {
  Stft stft(StftConfig{});
  const Spectrogram s = stft.Forward(SampleMatrix::Zero(2, 4096));
  EXPECT_EQ(s.channels(), 2);
  EXPECT_EQ(s.bins(), 513);
  EXPECT_EQ(s.frames(), 13);
  for (Eigen::Index c = 0; c < 2; ++c) EXPECT_EQ(s[c].cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(stft.Inverse(s, 4096).cwiseAbs().maxCoeff(), 0.0);
}

TEST(StftTest, MatchesDirectWindowedDft) {
  const StftConfig cfg{64, 16, Window::kHann};
  Stft stft(cfg);
  const SampleMatrix x = RandomSignal(1, 200, 3);
  const Spectrogram s = stft.Forward(x);
  const Eigen::VectorXd w = MakeWindow(cfg);
  for (Eigen::Index t = 0; t < s.frames(); ++t) {
    for (int k = 0; k < cfg.bins(); ++k) {
      std::complex<double> acc = 0;
      for (int n = 0; n < cfg.fft_size; ++n) {
        const double ang = -2.0 * std::numbers::pi * k * n / cfg.fft_size;
        acc += w[n] * x(0, t * cfg.hop + n) * std::polar(1.0, ang);
      }
      EXPECT_NEAR(std::abs(acc - s[0](k, t)), 0.0, 1e-10);
    }
  }
}

TEST(StftTest, BinCenteredSineConcentratesEnergy) {
  const StftConfig cfg;
  Stft stft(cfg);
  const int bin = 40;
  SampleMatrix x(1, 8192);
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    x(0, n) = std::sin(2.0 * std::numbers::pi * bin * n / cfg.fft_size);
  }
  const Spectrogram s = stft.Forward(x);
  for (Eigen::Index t = 0; t < s.frames(); ++t) {
    const Eigen::VectorXd e = s[0].col(t).cwiseAbs2();
    // Hann main lobe spans the neighbouring bins.
    const double lobe = e.segment(bin - 1, 3).sum();
    EXPECT_GE(lobe / e.sum(), 0.99);
    EXPECT_GE(e[bin] / e.sum(), 2.0 / 3.0 - 1e-9);
  }
}

TEST(StftTest, RoundTripInterior) {
  for (const StftConfig cfg : {StftConfig{}, StftConfig{512, 128, Window::kHann},
                               StftConfig{256, 128, Window::kSqrtHann}}) {
    Stft stft(cfg);
    const SampleMatrix x = RandomSignal(2, 9000, 7);
    const Spectrogram s = stft.Forward(x);
    const SampleMatrix y = stft.Inverse(s, x.cols());
    const Eigen::Index a = stft.InteriorBegin();
    const Eigen::Index b = stft.InteriorEnd(s.frames());
    ASSERT_GT(b, a);
    const double err = (y.middleCols(a, b - a) - x.middleCols(a, b - a)).cwiseAbs().maxCoeff();
    const double scale = x.middleCols(a, b - a).cwiseAbs().maxCoeff();
    EXPECT_LT(err / scale, 1e-10);
  }
}

TEST(StftTest, IdentityMaskReproducesInterior) {
  Stft stft(StftConfig{});
  const SampleMatrix x = RandomSignal(2, 16000, 11);
  Spectrogram s = stft.Forward(x);
  for (Eigen::Index c = 0; c < s.channels(); ++c) {
    s[c] = s[c].cwiseProduct(Eigen::MatrixXcd::Ones(s.bins(), s.frames()));
  }
  const SampleMatrix y = stft.Inverse(s, x.cols());
  const Eigen::Index a = stft.InteriorBegin();
  const Eigen::Index b = stft.InteriorEnd(s.frames());
  EXPECT_LT((y - x).middleCols(a, b - a).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(StftTest, ParsevalPerFrame) {
  const StftConfig cfg{256, 64, Window::kHann};
  Stft stft(cfg);
  const SampleMatrix x = RandomSignal(2, 3000, 5);
  const Spectrogram s = stft.Forward(x);
  const Eigen::VectorXd w = MakeWindow(cfg);
  double time_energy = 0, freq_energy = 0;
  for (Eigen::Index c = 0; c < 2; ++c) {
    for (Eigen::Index t = 0; t < s.frames(); ++t) {
      for (int n = 0; n < cfg.fft_size; ++n) {
        const double v = w[n] * x(c, t * cfg.hop + n);
        time_energy += v * v;
      }
      const Eigen::VectorXd e = s[c].col(t).cwiseAbs2();
      freq_energy += (e[0] + e[cfg.bins() - 1] + 2 * e.segment(1, cfg.bins() - 2).sum()) /
                     cfg.fft_size;
    }
  }
  EXPECT_LT(std::fabs(time_energy - freq_energy) / time_energy, 1e-9);
}

TEST(StftTest, ForwardAdjointIdentity) {
  const StftConfig cfg{128, 32, Window::kHann};
  Stft stft(cfg);
  const SampleMatrix x = RandomSignal(2, 700, 1);
  const Spectrogram fx = stft.Forward(x);
  const Spectrogram g = RandomSpectrogram(2, fx.frames(), cfg, 2);
  const SampleMatrix at = stft.ForwardAdjoint(g, x.cols());
  const double lhs = RealDot(fx, g);
  const double rhs = (x.array() * at.array()).sum();
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::fabs(lhs));
}

TEST(StftTest, InverseAdjointIdentity) {
  const StftConfig cfg{128, 32, Window::kHann};
  Stft stft(cfg);
  const Eigen::Index frames = 19;
  const Eigen::Index n = (frames - 1) * cfg.hop + cfg.fft_size;
  const Spectrogram y = RandomSpectrogram(2, frames, cfg, 3);
  const SampleMatrix g = RandomSignal(2, n, 4);
  const SampleMatrix iy = stft.Inverse(y, n);
  const Spectrogram at = stft.InverseAdjoint(g, frames);
  const double lhs = (iy.array() * g.array()).sum();
  const double rhs = RealDot(y, at);
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::fabs(lhs));
}

TEST(LevelTest, Dbrms) {
  EXPECT_NEAR(dbrms(SampleMatrix::Ones(2, 100)), 0.0, 1e-12);
  SampleMatrix sine(1, 16000);
  for (Eigen::Index n = 0; n < sine.cols(); ++n) {
    sine(0, n) = std::sin(2.0 * std::numbers::pi * 100.0 * n / 16000.0);
  }
  EXPECT_NEAR(dbrms(sine), -3.0103, 0.02);
  EXPECT_EQ(dbrms(SampleMatrix::Zero(2, 10)), kDbFloor);
  const SampleMatrix x = RandomSignal(2, 500, 9);
  EXPECT_NEAR(dbrms(SampleMatrix(0.25 * x)), dbrms(x) + 20 * std::log10(0.25), 1e-10);
}

TEST(SnrTest, Contract) {
  const SampleMatrix ref = RandomSignal(2, 1000, 10);
  EXPECT_EQ(snr(SampleMatrix::Zero(2, 1000), ref), 0.0);
  const SampleMatrix unit = ref / ref.norm();
  EXPECT_NEAR(snr(unit, unit), 10 * std::log10((1 + 1e-6) / 1e-6), 1e-9);
  EXPECT_NEAR(snr(unit, unit), 60.0, 1e-5);
  SampleMatrix noise = RandomSignal(2, 1000, 12);
  noise *= 0.1 / noise.norm();
  EXPECT_NEAR(snr(SampleMatrix(unit + noise), unit), 20.0, 1e-3);
  EXPECT_THROW(snr(SampleMatrix::Zero(1, 10), SampleMatrix::Zero(2, 10)),
               std::invalid_argument);
}

TEST(SnrTest, LevelInvariantAboveStabilizer) {
  const SampleMatrix ref = RandomSignal(1, 800, 13);
  const SampleMatrix est = ref + 0.05 * RandomSignal(1, 800, 14);
  EXPECT_NEAR(snr(SampleMatrix(3.0 * est), SampleMatrix(3.0 * ref)), snr(est, ref), 1e-4);
}

TEST(AudioChunkTest, Validate) {
  EXPECT_THROW(AudioChunk(SampleMatrix(0, 10), 16000).Validate(), std::invalid_argument);
  SampleMatrix bad = SampleMatrix::Zero(1, 4);
  bad(0, 2) = std::nan("");
  EXPECT_THROW(AudioChunk(bad, 16000).Validate(), std::invalid_argument);
}

TEST(WavTest, RoundTripIsExactForFloatSamples) {
  SampleMatrix x = RandomSignal(2, 1234, 21);
  QuantizeToFloat(x);
  const AudioChunk a(x, 22050);
  const AudioChunk b = DecodeWav(EncodeWav(a));
  EXPECT_EQ(b.sample_rate, 22050);
  ASSERT_EQ(b.samples.rows(), 2);
  ASSERT_EQ(b.samples.cols(), 1234);
  EXPECT_EQ((b.samples - x).cwiseAbs().maxCoeff(), 0.0);

  const auto path = std::filesystem::temp_directory_path() / "regionsep_wav_test.wav";
  WriteWav(path, a);
  EXPECT_EQ((ReadWav(path).samples - x).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(ReadWav(path, 16000), std::runtime_error);
  std::filesystem::remove(path);
  EXPECT_THROW(DecodeWav("RIFF0000"), std::runtime_error);
}

}  // namespace
}  // namespace regionsep
