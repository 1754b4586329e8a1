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

#include "regionsep/signal.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace regionsep {

void AudioChunk::Validate() const {
  if (samples.rows() < 1 || samples.cols() < 1) {
    throw std::invalid_argument("audio chunk must have at least one channel "
                                "and one sample");
  }
  if (!samples.allFinite()) {
    throw std::invalid_argument("audio chunk contains non-finite samples");
  }
  if (sample_rate <= 0) {
    throw std::invalid_argument("audio chunk sample rate must be positive");
  }
}

std::string WindowName(Window w) {
  switch (w) {
    case Window::kHann:
      return "hann";
    case Window::kSqrtHann:
      return "sqrt-hann";
  }
  return "unknown";
}

Window ParseWindow(const std::string& name) {
  if (name == "hann") return Window::kHann;
  if (name == "sqrt-hann") return Window::kSqrtHann;
  throw std::invalid_argument("unknown window '" + name + "'");
}

Eigen::VectorXd MakeWindow(const StftConfig& cfg) {
  Eigen::VectorXd w(cfg.fft_size);
  for (int k = 0; k < cfg.fft_size; ++k) {
    const double hann =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * k / cfg.fft_size);
    w[k] = cfg.window == Window::kHann ? hann : std::sqrt(hann);
  }
  return w;
}

namespace {

// Squared-window overlap-add over one hop period. Constant iff COLA holds.
Eigen::VectorXd SquaredWindowPeriod(const Eigen::VectorXd& w, int hop) {
  Eigen::VectorXd period = Eigen::VectorXd::Zero(hop);
  for (Eigen::Index k = 0; k < w.size(); ++k) period[k % hop] += w[k] * w[k];
  return period;
}

}  // namespace

void StftConfig::Validate() const {
  if (fft_size < 4 || fft_size % 2 != 0) {
    throw std::invalid_argument("fft_size must be even and >= 4");
  }
  if (hop < 1 || hop > fft_size) {
    throw std::invalid_argument("hop must satisfy 1 <= hop <= fft_size");
  }
  const Eigen::VectorXd period = SquaredWindowPeriod(MakeWindow(*this), hop);
  const double mean = period.mean();
  if (mean <= 0.0 ||
      (period.array() - mean).abs().maxCoeff() > 1e-10 * mean) {
    throw std::invalid_argument("window " + WindowName(window) +
                                " does not satisfy overlap-add at hop " +
                                std::to_string(hop));
  }
}

Spectrogram Spectrogram::Zeros(Eigen::Index channels, Eigen::Index bins,
                               Eigen::Index frames, const StftConfig& cfg) {
  Spectrogram s;
  s.fft_size = cfg.fft_size;
  s.hop = cfg.hop;
  s.channels_data.assign(channels, Eigen::MatrixXcd::Zero(bins, frames));
  return s;
}

struct Stft::Plan {
  Eigen::FFT<double> fft;
  std::vector<double> real_buf;
  std::vector<std::complex<double>> complex_buf;
};

Stft::Stft(const StftConfig& cfg)
    : cfg_(cfg), window_(MakeWindow(cfg)), plan_(std::make_unique<Plan>()) {
  cfg_.Validate();
  steady_envelope_ = window_.squaredNorm() / cfg_.hop;
  plan_->fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  plan_->real_buf.resize(cfg_.fft_size);
  plan_->complex_buf.resize(cfg_.bins());
}

Stft::~Stft() = default;
Stft::Stft(Stft&&) noexcept = default;
Stft& Stft::operator=(Stft&&) noexcept = default;

Spectrogram Stft::Forward(const SampleMatrix& x) const {
  const Eigen::Index n = x.cols();
  if (n < cfg_.fft_size) {
    throw std::invalid_argument("chunk too short: " + std::to_string(n) +
                                " samples < fft_size " +
                                std::to_string(cfg_.fft_size));
  }
  const Eigen::Index frames = cfg_.frames_for(n);
  const int nfft = cfg_.fft_size;
  Spectrogram out = Spectrogram::Zeros(x.rows(), cfg_.bins(), frames, cfg_);
  std::vector<double>& buf = plan_->real_buf;
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    for (Eigen::Index t = 0; t < frames; ++t) {
      const Eigen::Index start = t * cfg_.hop;
      for (int k = 0; k < nfft; ++k) buf[k] = window_[k] * x(c, start + k);
      plan_->fft.fwd(out[c].col(t).data(), buf.data(), nfft);
    }
  }
  return out;
}

Eigen::VectorXd Stft::InverseGain(Eigen::Index frames,
                                  Eigen::Index out_len) const {
  Eigen::VectorXd env = Eigen::VectorXd::Zero(out_len);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const Eigen::Index start = t * cfg_.hop;
    for (int k = 0; k < cfg_.fft_size && start + k < out_len; ++k) {
      env[start + k] += window_[k] * window_[k];
    }
  }
  const double floor = 0.1 * steady_envelope_;
  for (Eigen::Index i = 0; i < out_len; ++i) {
    env[i] = 1.0 / std::max(env[i], floor);
  }
  return env;
}

SampleMatrix Stft::Inverse(const Spectrogram& spec, Eigen::Index out_len) const {
  if (spec.bins() != cfg_.bins() ||
      (spec.fft_size != 0 && spec.fft_size != cfg_.fft_size) ||
      (spec.hop != 0 && spec.hop != cfg_.hop)) {
    throw std::invalid_argument("spectrogram shape does not match stft config");
  }
  if (out_len < 0) throw std::invalid_argument("negative output length");
  const int nfft = cfg_.fft_size;
  const Eigen::Index frames = spec.frames();
  SampleMatrix out = SampleMatrix::Zero(spec.channels(), out_len);
  std::vector<double>& buf = plan_->real_buf;
  for (Eigen::Index c = 0; c < spec.channels(); ++c) {
    for (Eigen::Index t = 0; t < frames; ++t) {
      const Eigen::Index start = t * cfg_.hop;
      if (start >= out_len) break;
      plan_->fft.inv(buf.data(), spec[c].col(t).data(), nfft);
      const Eigen::Index stop = std::min<Eigen::Index>(nfft, out_len - start);
      for (Eigen::Index k = 0; k < stop; ++k) {
        out(c, start + k) += window_[k] * buf[k];
      }
    }
  }
  const Eigen::VectorXd gain = InverseGain(frames, out_len);
  out.array().rowwise() *= gain.transpose().array();
  return out;
}

SampleMatrix Stft::ForwardAdjoint(const Spectrogram& grad,
                                  Eigen::Index n) const {
  if (grad.bins() != cfg_.bins() || grad.frames() != cfg_.frames_for(n)) {
    throw std::invalid_argument("gradient shape does not match stft config");
  }
  const int nfft = cfg_.fft_size;
  const int half = nfft / 2;
  SampleMatrix out = SampleMatrix::Zero(grad.channels(), n);
  std::vector<double>& buf = plan_->real_buf;
  std::vector<std::complex<double>>& spec = plan_->complex_buf;
  // Re sum_{f<=N/2} G_f e^{+i 2 pi f k / N} equals (N/2) irfft(G') where G'
  // doubles the DC and Nyquist bins.
  for (Eigen::Index c = 0; c < grad.channels(); ++c) {
    for (Eigen::Index t = 0; t < grad.frames(); ++t) {
      for (int f = 0; f <= half; ++f) spec[f] = grad[c](f, t);
      spec[0] *= 2.0;
      spec[half] *= 2.0;
      plan_->fft.inv(buf.data(), spec.data(), nfft);
      const Eigen::Index start = t * cfg_.hop;
      for (int k = 0; k < nfft; ++k) {
        out(c, start + k) += window_[k] * buf[k] * half;
      }
    }
  }
  return out;
}

Spectrogram Stft::InverseAdjoint(const SampleMatrix& grad,
                                 Eigen::Index frames) const {
  const int nfft = cfg_.fft_size;
  const int half = nfft / 2;
  const Eigen::Index out_len = grad.cols();
  const Eigen::VectorXd gain = InverseGain(frames, out_len);
  Spectrogram out = Spectrogram::Zeros(grad.rows(), cfg_.bins(), frames, cfg_);
  std::vector<double>& buf = plan_->real_buf;
  for (Eigen::Index c = 0; c < grad.rows(); ++c) {
    for (Eigen::Index t = 0; t < frames; ++t) {
      const Eigen::Index start = t * cfg_.hop;
      if (start >= out_len) break;
      for (int k = 0; k < nfft; ++k) {
        buf[k] = start + k < out_len
                     ? window_[k] * gain[start + k] * grad(c, start + k)
                     : 0.0;
      }
      auto col = out[c].col(t);
      plan_->fft.fwd(col.data(), buf.data(), nfft);
      col *= 2.0 / nfft;
      col[0] *= 0.5;
      col[half] *= 0.5;
      // The inverse ignores the imaginary parts of DC and Nyquist.
      col[0] = col[0].real();
      col[half] = col[half].real();
    }
  }
  return out;
}

Spectrogram stft(const AudioChunk& audio, const StftConfig& cfg) {
  audio.Validate();
  return Stft(cfg).Forward(audio.samples);
}

AudioChunk istft(const Spectrogram& spec, const StftConfig& cfg,
                 Eigen::Index out_len, int sample_rate) {
  return AudioChunk(Stft(cfg).Inverse(spec, out_len), sample_rate);
}

double rms(const SampleMatrix& x) {
  if (x.size() == 0) return 0.0;
  return std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
}

double dbrms(const SampleMatrix& x) {
  if (x.size() == 0) return kDbFloor;
  const double mean_square = x.squaredNorm() / static_cast<double>(x.size());
  if (mean_square <= 0.0) return kDbFloor;
  return std::max(10.0 * std::log10(mean_square), kDbFloor);
}

double snr(const SampleMatrix& est, const SampleMatrix& ref) {
  if (est.rows() != ref.rows() || est.cols() != ref.cols()) {
    throw std::invalid_argument("snr: shape mismatch");
  }
  const double signal = ref.squaredNorm();
  const double noise = (est - ref).squaredNorm();
  return 10.0 * std::log10((signal + kSnrStability) / (noise + kSnrStability));
}

}  // namespace regionsep
