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

#ifndef REGIONSEP_SIGNAL_H_
#define REGIONSEP_SIGNAL_H_

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace regionsep {

// Channels x samples, one row per channel.
using SampleMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kDbFloor = -120.0;
inline constexpr double kSnrStability = 1e-6;

struct AudioChunk {
  SampleMatrix samples;
  int sample_rate = 16000;

  AudioChunk() = default;
  AudioChunk(SampleMatrix s, int rate) : samples(std::move(s)), sample_rate(rate) {}

  Eigen::Index channels() const { return samples.rows(); }
  Eigen::Index frames() const { return samples.cols(); }
  double seconds() const {
    return static_cast<double>(frames()) / static_cast<double>(sample_rate);
  }

  // Throws std::invalid_argument unless C >= 1, N >= 1 and all samples finite.
  void Validate() const;
};

enum class Window { kHann, kSqrtHann };

std::string WindowName(Window w);
Window ParseWindow(const std::string& name);

struct StftConfig {
  int fft_size = 1024;
  int hop = 256;
  Window window = Window::kHann;

  int bins() const { return fft_size / 2 + 1; }
  // Number of frames for a signal of n samples (frames start at sample 0,
  // no padding). Zero when n < fft_size.
  Eigen::Index frames_for(Eigen::Index n) const {
    return n < fft_size ? 0 : (n - fft_size) / hop + 1;
  }
  // Throws unless hop <= fft_size, fft_size even and the squared window
  // overlap-adds to a constant at this hop.
  void Validate() const;
  bool operator==(const StftConfig&) const = default;
};

// Periodic analysis window of length cfg.fft_size.
Eigen::VectorXd MakeWindow(const StftConfig& cfg);

// C x F x T complex bins, stored as one F x T matrix per channel so that each
// frame's half spectrum is contiguous.
struct Spectrogram {
  std::vector<Eigen::MatrixXcd> channels_data;
  int fft_size = 0;
  int hop = 0;

  Eigen::Index channels() const {
    return static_cast<Eigen::Index>(channels_data.size());
  }
  Eigen::Index bins() const {
    return channels_data.empty() ? 0 : channels_data.front().rows();
  }
  Eigen::Index frames() const {
    return channels_data.empty() ? 0 : channels_data.front().cols();
  }

  Eigen::MatrixXcd& operator[](Eigen::Index c) { return channels_data[c]; }
  const Eigen::MatrixXcd& operator[](Eigen::Index c) const {
    return channels_data[c];
  }

  static Spectrogram Zeros(Eigen::Index channels, Eigen::Index bins,
                           Eigen::Index frames, const StftConfig& cfg);
};

// Short-time Fourier transform with a fixed configuration. Holds the FFT plan,
// so an instance must not be shared between threads.
//
// The inverse is a weighted overlap-add normalized by the squared-window
// envelope, floored at a tenth of its steady-state value. Samples inside
// InteriorBegin()..InteriorEnd() are reconstructed exactly.
class Stft {
 public:
  explicit Stft(const StftConfig& cfg);
  ~Stft();
  Stft(Stft&&) noexcept;
  Stft& operator=(Stft&&) noexcept;

  const StftConfig& config() const { return cfg_; }
  const Eigen::VectorXd& window() const { return window_; }

  Spectrogram Forward(const SampleMatrix& x) const;
  SampleMatrix Inverse(const Spectrogram& spec, Eigen::Index out_len) const;

  // Adjoint of Forward. `grad` packs dL/dRe X + i dL/dIm X; returns dL/dx.
  SampleMatrix ForwardAdjoint(const Spectrogram& grad, Eigen::Index n) const;
  // Adjoint of Inverse. Returns dL/dRe Y + i dL/dIm Y packed as complex.
  Spectrogram InverseAdjoint(const SampleMatrix& grad,
                             Eigen::Index frames) const;

  // Overlap-add normalization applied to output sample n.
  Eigen::VectorXd InverseGain(Eigen::Index frames, Eigen::Index out_len) const;

  Eigen::Index InteriorBegin() const { return cfg_.fft_size - cfg_.hop; }
  Eigen::Index InteriorEnd(Eigen::Index frames) const {
    return frames == 0 ? 0 : (frames - 1) * cfg_.hop + cfg_.hop;
  }

 private:
  struct Plan;
  StftConfig cfg_;
  Eigen::VectorXd window_;
  double steady_envelope_ = 1.0;
  std::unique_ptr<Plan> plan_;
};

Spectrogram stft(const AudioChunk& audio, const StftConfig& cfg);
AudioChunk istft(const Spectrogram& spec, const StftConfig& cfg,
                 Eigen::Index out_len, int sample_rate);

// 20 log10 RMS over all C*N samples, floored at kDbFloor.
double dbrms(const SampleMatrix& x);
inline double dbrms(const AudioChunk& a) { return dbrms(a.samples); }

double rms(const SampleMatrix& x);

// 10 log10((|ref|^2 + xi) / (|est - ref|^2 + xi)).
double snr(const SampleMatrix& est, const SampleMatrix& ref);
inline double snr(const AudioChunk& est, const AudioChunk& ref) {
  return snr(est.samples, ref.samples);
}

}  // namespace regionsep

#endif  // REGIONSEP_SIGNAL_H_
