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
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "oracles.h"
#include "regionsep/separator.h"

namespace regionsep {
namespace {

SeparatorDims TinyDims() {
  SeparatorDims d;
  d.channels = 2;
  d.stft = {64, 16, Window::kHann};
  d.bands = 4;
  d.embed_dim = 3;
  d.film_hidden = 6;
  d.dec_hidden = 5;
  return d;
}

SampleMatrix Noise(Eigen::Index n, double scale, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0, scale);
  SampleMatrix x(2, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  return x;
}

Eigen::VectorXd RandomQuery(const SeparatorDims& d, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ud(0.2, 1.0);
  Eigen::VectorXd c(d.embed_dim), r(d.embed_dim);
  for (int i = 0; i < d.embed_dim; ++i) {
    c[i] = ud(rng) - 0.6;
    r[i] = ud(rng);
  }
  return to_query_vector(Ellipsoid(c, oracle::RandomRotation(d.embed_dim, rng), r));
}

TEST(BandMapTest, CoversAllBins) {
  const auto bands = MakeBandMap(513, 8);
  ASSERT_EQ(bands.size(), 8u);
  EXPECT_EQ(bands.front().first, 0);
  EXPECT_EQ(bands.back().second, 513);
  for (size_t b = 1; b < bands.size(); ++b) EXPECT_EQ(bands[b].first, bands[b - 1].second);
  EXPECT_EQ(bands[0].second - bands[0].first, 64);
  EXPECT_EQ(bands[7].second - bands[7].first, 65);
}

TEST(SeparatorTest, AllOnesIsIdentity) {
  const SeparatorDims dims = TinyDims();
  const SeparatorModel model = SeparatorModel::AllOnes(dims);
  const Stft stft(dims.stft);
  const SampleMatrix x = Noise(512, 0.2, 1);
  const Ellipsoid q = Ellipsoid::Ball(Eigen::VectorXd::Zero(3), 1.0);
  const Spectrogram mask = estimate_mask(stft.Forward(x), to_query_vector(q), model);
  for (Eigen::Index c = 0; c < mask.channels(); ++c) {
    EXPECT_LT((mask[c].array() - std::complex<double>(1, 0)).abs().maxCoeff(), 1e-12);
  }
  const SampleMatrix y = separate(x, q, model, stft);
  const Eigen::Index b = stft.InteriorBegin(), e = stft.InteriorEnd(dims.stft.frames_for(512));
  EXPECT_LT((y.middleCols(b, e - b) - x.middleCols(b, e - b)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SeparatorTest, InitializationIsDeterministic) {
  const SeparatorDims dims = TinyDims();
  const SeparatorModel a = SeparatorModel::Initialize(dims, 7);
  const SeparatorModel b = SeparatorModel::Initialize(dims, 7);
  const SeparatorModel c = SeparatorModel::Initialize(dims, 8);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_NE(a.params(), c.params());
  a.Validate();
}

TEST(SeparatorTest, MaskIsBounded) {
  const SeparatorDims dims = TinyDims();
  const Stft stft(dims.stft);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    SeparatorModel model = SeparatorModel::Initialize(dims, seed);
    // Large weights drive the output nonlinearity into saturation.
    model.params() *= 50.0;
    const Spectrogram x = stft.Forward(Noise(256, 10.0, seed));
    const Spectrogram m = estimate_mask(x, 100.0 * RandomQuery(dims, seed), model);
    for (Eigen::Index c = 0; c < m.channels(); ++c) {
      EXPECT_LE(m[c].array().abs().maxCoeff(), std::sqrt(2.0) * dims.mask_bound);
      EXPECT_LE(m[c].real().cwiseAbs().maxCoeff(), dims.mask_bound);
    }
  }
}

TEST(SeparatorTest, OutputScalesWithInput) {
  const SeparatorDims dims = TinyDims();
  const SeparatorModel model = SeparatorModel::Initialize(dims, 3);
  const Stft stft(dims.stft);
  const SampleMatrix x = Noise(512, 0.2, 2);
  const Ellipsoid q = Ellipsoid::Ball(Eigen::VectorXd::Constant(3, 0.1), 0.5);
  const SampleMatrix y1 = separate(x, q, model, stft);
  const SampleMatrix y2 = separate(SampleMatrix(3.0 * x), q, model, stft);
  EXPECT_LT((y2 - 3.0 * y1).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SeparatorTest, GradientMatchesFiniteDifference) {
  const SeparatorDims dims = TinyDims();
  SeparatorModel model = SeparatorModel::Initialize(dims, 11);
  const Stft stft(dims.stft);
  const SampleMatrix y = Noise(256, 0.1, 3);
  const SampleMatrix x = y + Noise(256, 0.1, 4);
  const Eigen::VectorXd q = RandomQuery(dims, 5);
  const LossConfig cfg;
  Eigen::VectorXd grad;
  const LossReport at = loss_and_gradient(model, x, y, q, stft, cfg, &grad).loss;
  ASSERT_EQ(grad.size(), model.num_params());
  const Eigen::VectorXd p0 = model.params();
  // The level weight is held at its value at p0.
  auto f = [&](const Eigen::VectorXd& p) {
    SeparatorModel m = model;
    m.params() = p;
    const LossReport r = loss_and_gradient(m, x, y, q, stft, cfg, nullptr).loss;
    return r.recon + at.weight * r.reg;
  };
  const double floor = 1e-3 * grad.cwiseAbs().maxCoeff();
  const Eigen::Index n = model.num_params();
  for (int k = 0; k < 64; ++k) {
    const Eigen::Index i = (k * n) / 64 + k % 5;
    const double fd = oracle::CentralDifference(f, p0, i, 1e-6);
    EXPECT_LT(oracle::RelativeError(grad[i], fd, floor), 1e-4) << "parameter " << i;
  }
}

TEST(OracleSeparateTest, SumsMembers) {
  const SampleMatrix a = Noise(100, 1, 1), b = Noise(100, 1, 2), c = Noise(100, 1, 3);
  Eigen::MatrixXd e(3, 2);
  e << 0, 0, 0.5, 0, 3, 3;
  std::vector<int> members;
  const SampleMatrix s =
      oracle_separate({&a, &b, &c}, e, Ellipsoid::Ball(Eigen::VectorXd::Zero(2), 1.0), &members);
  EXPECT_EQ(members, (std::vector<int>{0, 1}));
  EXPECT_LT((s - a - b).cwiseAbs().maxCoeff(), 1e-15);
  const SampleMatrix none =
      oracle_separate({&a, &b, &c}, e, Ellipsoid::Ball(Eigen::VectorXd::Constant(2, -5), 0.1));
  EXPECT_EQ(none.cwiseAbs().maxCoeff(), 0.0);
}

TEST(CheckpointTest, RoundTrip) {
  const SeparatorDims dims = TinyDims();
  const SeparatorModel model = SeparatorModel::Initialize(dims, 4);
  const auto path = std::filesystem::temp_directory_path() / "regionsep_model_test.rsqm";
  SaveModel(path, model, "{\"seed\": 4}");
  std::string echo;
  const SeparatorModel back = LoadModel(path, &echo);
  EXPECT_EQ(back.dims(), dims);
  EXPECT_EQ(back.params(), model.params());
  EXPECT_EQ(echo, "{\"seed\": 4}");
  std::filesystem::remove(path);
  EXPECT_THROW(LoadModel(path), std::runtime_error);
}

}  // namespace
}  // namespace regionsep
