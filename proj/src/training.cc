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

#include "regionsep/training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <stdexcept>

namespace regionsep {

void TrainConfig::Validate() const {
  if (!(lr >= 0)) throw std::invalid_argument("train: lr must be >= 0");
  if (!(lr_decay_per_epoch > 0 && lr_decay_per_epoch <= 1)) {
    throw std::invalid_argument("train: lr decay must lie in (0, 1]");
  }
  if (batch_size < 1 || batches_per_epoch < 1 || epochs < 0) {
    throw std::invalid_argument("train: batch and epoch counts must be positive");
  }
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_eps > 0)) {
    throw std::invalid_argument("train: invalid optimizer moments");
  }
  if (!(weight_decay >= 0) || !(gain_db_range >= 0) ||
      !(swap_probability >= 0 && swap_probability <= 1)) {
    throw std::invalid_argument("train: invalid augmentation or decay settings");
  }
}

double TrainConfig::LearningRateAt(int epoch) const {
  return lr * std::pow(lr_decay_per_epoch, epoch);
}

AdamW::AdamW(Eigen::Index n, const TrainConfig& cfg)
    : beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.adam_eps),
      weight_decay_(cfg.weight_decay),
      m_(Eigen::VectorXd::Zero(n)),
      v_(Eigen::VectorXd::Zero(n)) {}

void AdamW::Step(Eigen::VectorXd* params, const Eigen::VectorXd& grad, double lr) {
  if (grad.size() != m_.size() || params->size() != m_.size()) {
    throw std::invalid_argument("AdamW: size mismatch");
  }
  ++t_;
  m_ = beta1_ * m_ + (1 - beta1_) * grad;
  v_ = beta2_ * v_ + (1 - beta2_) * grad.cwiseAbs2();
  if (lr == 0) return;
  const double c1 = 1 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1 - std::pow(beta2_, static_cast<double>(t_));
  const Eigen::ArrayXd update =
      (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  params->array() -= lr * (update + weight_decay_ * params->array());
}

Eigen::Index TrainingSet::num_specs() const {
  Eigen::Index n = 0;
  for (const auto& c : clips) n += static_cast<Eigen::Index>(c.specs.size());
  return n;
}

Example make_example(const TrainingSet& data, const ClipRef& clip,
                     const QuerySpec& spec, const TrainConfig& cfg,
                     std::mt19937_64* rng) {
  const auto& first = data.tracks[clip.track].front();
  Example ex{SampleMatrix::Zero(first.rows(), clip.length),
             SampleMatrix::Zero(first.rows(), clip.length)};
  std::vector<int> targets = spec.targets;
  std::sort(targets.begin(), targets.end());
  for (int i : spec.MixtureIndices()) {
    SampleMatrix stem = data.Stem(clip, i);
    if (cfg.augment && rng != nullptr) {
      const double db = (2 * Uniform01(*rng) - 1) * cfg.gain_db_range;
      stem *= std::pow(10.0, db / 20.0);
      if (stem.rows() == 2 && Uniform01(*rng) < cfg.swap_probability) {
        stem.row(0).swap(stem.row(1));
      }
    }
    ex.mixture += stem;
    if (std::binary_search(targets.begin(), targets.end(), i)) ex.target += stem;
  }
  return ex;
}

namespace {

// Each step allocates and frees spectrogram-sized buffers. With glibc's
// default thresholds those go straight back to the kernel and every step pays
// the page faults again; keeping them in the heap removes that system time.
void RetainLargeAllocations() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 512 << 20);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 256 << 20);
    return true;
  }();
  (void)done;
#endif
}

size_t Pick(std::mt19937_64& rng, size_t n) {
  return std::min(n - 1, static_cast<size_t>(Uniform01(rng) * static_cast<double>(n)));
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double ValidationSnr(const SeparatorModel& model, const TrainingSet& data,
                     const TrainConfig& cfg, const Stft& stft) {
  const Eigen::Index total = data.num_specs();
  if (total == 0 || cfg.val_queries <= 0) return 0;
  const Eigen::Index count = std::min<Eigen::Index>(total, cfg.val_queries);
  std::vector<double> snrs;
  Eigen::Index flat = 0, next = 0, picked = 0;
  for (const auto& clip : data.clips) {
    for (const auto& spec : clip.specs) {
      if (picked < count && flat == next) {
        TrainConfig plain = cfg;
        plain.augment = false;
        const Example ex = make_example(data, clip, spec, plain, nullptr);
        const SampleMatrix est = separate(ex.mixture, validation_query(spec), model, stft);
        snrs.push_back(snr(est, ex.target));
        ++picked;
        next = picked * total / count;
      }
      ++flat;
    }
  }
  return Median(snrs);
}

}  // namespace

TrainHistory train(SeparatorModel* model, const TrainingSet& data,
                   const LossConfig& loss_cfg, const TrainConfig& cfg,
                   const TrainingSet* validation, const TrainProgress& progress) {
  cfg.Validate();
  loss_cfg.Validate();
  if (data.clips.empty() || data.num_specs() == 0) {
    throw std::invalid_argument("train: no clips with query specs");
  }
  RetainLargeAllocations();
  const Stft stft(model->dims().stft);
  std::mt19937_64 rng(cfg.seed);
  AdamW opt(model->num_params(), cfg);
  TrainHistory history;
  Eigen::VectorXd grad(model->num_params()), batch_grad(model->num_params());
  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.LearningRateAt(epoch);
    double epoch_total = 0;
    for (int b = 0; b < cfg.batches_per_epoch; ++b) {
      batch_grad.setZero();
      StepRecord rec;
      rec.epoch = epoch;
      rec.step = step;
      rec.lr = lr;
      for (int i = 0; i < cfg.batch_size; ++i) {
        const ClipRef& clip = data.clips[Pick(rng, data.clips.size())];
        const QuerySpec& spec = clip.specs[Pick(rng, clip.specs.size())];
        const Ellipsoid query =
            cfg.fixed_query ? validation_query(spec) : sample_training_query(spec, rng);
        const Example ex = make_example(data, clip, spec, cfg, &rng);
        const ExampleResult r = loss_and_gradient(*model, ex.mixture, ex.target,
                                                  to_query_vector(query), stft,
                                                  loss_cfg, &grad);
        if (!std::isfinite(r.loss.total) || !grad.allFinite()) {
          throw std::runtime_error("training diverged at step " + std::to_string(step) +
                                   " (objective " + std::to_string(r.loss.total) + ")");
        }
        batch_grad += grad;
        rec.total += r.loss.total;
        rec.recon += r.loss.recon;
        rec.reg += r.loss.reg;
        rec.weight += r.loss.weight;
        rec.snr_db += r.snr_db;
      }
      const double inv = 1.0 / cfg.batch_size;
      batch_grad *= inv;
      rec.total *= inv;
      rec.recon *= inv;
      rec.reg *= inv;
      rec.weight *= inv;
      rec.snr_db *= inv;
      opt.Step(&model->params(), batch_grad, lr);
      epoch_total += rec.total;
      history.steps.push_back(rec);
      if (progress) progress(rec);
      ++step;
    }
    EpochRecord e;
    e.epoch = epoch;
    e.lr = lr;
    e.mean_total = epoch_total / cfg.batches_per_epoch;
    if (validation != nullptr) e.val_median_snr = ValidationSnr(*model, *validation, cfg, stft);
    history.epochs.push_back(e);
  }
  return history;
}

std::string FormatLossTrace(const TrainHistory& history) {
  std::string out = "step\tepoch\tlr\ttotal\trecon\treg\tweight\tsnr_db\n";
  char buf[512];
  for (const auto& s : history.steps) {
    std::snprintf(buf, sizeof(buf), "%lld\t%d\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n",
                  static_cast<long long>(s.step), s.epoch, s.lr, s.total, s.recon, s.reg,
                  s.weight, s.snr_db);
    out += buf;
  }
  return out;
}

void WriteLossTrace(const std::filesystem::path& path, const TrainHistory& history) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << FormatLossTrace(history);
}

}  // namespace regionsep
