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

#include "fixtures.h"
#include "oracles.h"
#include "regionsep/query_precompute.h"

namespace regionsep {
namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

SampleMatrix AtLevel(double db) {
  // A constant signal has RMS equal to its amplitude.
  return SampleMatrix::Constant(2, 1000, std::pow(10.0, db / 20.0));
}

TEST(AvailableSourcesTest, Gate) {
  const std::vector<SampleMatrix> stems = {AtLevel(-60), AtLevel(-48), AtLevel(-10),
                                           SampleMatrix::Zero(2, 1000)};
  // The comparison is inclusive: a stem whose level equals the gate is kept.
  const double gate = dbrms(stems[1]);
  EXPECT_NEAR(gate, -48.0, 1e-9);
  EXPECT_EQ(available_sources(stems, gate), (std::vector<int>{1, 2}));
  EXPECT_EQ(available_sources(stems, std::nextafter(gate, 0.0)), (std::vector<int>{2}));
  const std::vector<SampleMatrix> silent = {SampleMatrix::Zero(2, 100),
                                            SampleMatrix::Zero(2, 100)};
  EXPECT_TRUE(available_sources(silent, -48.0).empty());
  PrecomputeConfig cfg;
  EXPECT_TRUE(precompute_clip("c", silent, Mat::Zero(2, 3), cfg).empty());
}

TEST(EnclosingEllipsoidTest, SinglePointIsDeltaBall) {
  Mat p(1, 3);
  p << 1, 2, 3;
  const EnclosingEllipsoid e = enclosing_ellipsoid(p, 1e-4);
  EXPECT_EQ(e.center, Vec(p.row(0).transpose()));
  EXPECT_EQ(e.eigenvalues, Vec::Constant(3, 1e-4));
  EXPECT_EQ(e.axes, Mat::Identity(3, 3));
}

TEST(EnclosingEllipsoidTest, TwoPointsOnBoundary) {
  Mat p(2, 2);
  p << -1, 0, 1, 0;
  const EnclosingEllipsoid e = enclosing_ellipsoid(p, 1e-4);
  const Ellipsoid el = e.AsEllipsoid();
  for (int i = 0; i < 2; ++i) {
    const double d = mahalanobis(Vec(p.row(i).transpose()), el);
    EXPECT_NEAR(d, 1.0, 1e-9);
    EXPECT_LE(d, 1.0);
  }
  EXPECT_NEAR(e.radii.maxCoeff(), 1.0, 1e-9);
  EXPECT_EQ(e.radii.minCoeff(), 0.0);
}

TEST(EnclosingEllipsoidTest, TightOnRandomSets) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat p = fixtures::RandomEmbeddings(5, 4, rng, false);
    const EnclosingEllipsoid e = enclosing_ellipsoid(p, 1e-4);
    Ellipsoid el = e.AsEllipsoid();
    for (int i = 0; i < 5; ++i) EXPECT_TRUE(contains(el, Vec(p.row(i).transpose())));
    el.radii *= 0.999;
    int expelled = 0;
    for (int i = 0; i < 5; ++i) expelled += !contains(el, Vec(p.row(i).transpose()));
    EXPECT_GE(expelled, 1);
  }
}

TEST(EnclosingEllipsoidTest, CoincidentPointsFallBackToBall) {
  Mat p = Mat::Ones(3, 2);
  const EnclosingEllipsoid e = enclosing_ellipsoid(p, 1e-4);
  EXPECT_EQ(e.eigenvalues, Vec::Constant(2, 1e-4));
}

TEST(ExcludingRadiiTest, NoNonTargetsScalesInclusion) {
  PrecomputeConfig cfg;
  const Vec lambda = (Vec(3) << 4.0, 1e-6, 0.0).finished();
  const ExcludingRadii x =
      excluding_radii(Mat(0, 3), Vec::Zero(3), Mat::Identity(3, 3), lambda, cfg);
  const double floor = std::sqrt(cfg.delta);
  EXPECT_DOUBLE_EQ(x.radii[0], 4.0 * 2.0);
  EXPECT_DOUBLE_EQ(x.radii[1], 4.0 * floor);
  EXPECT_DOUBLE_EQ(x.radii[2], 4.0 * floor);
  EXPECT_TRUE(x.caught.empty());
}

TEST(ExcludingRadiiTest, DominatesInclusionAndKeepsNonTargetsOut) {
  std::mt19937_64 rng(11);
  PrecomputeConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const Mat all = fixtures::RandomEmbeddings(7, 6, rng, false);
    const Mat targets = all.topRows(3);
    const Mat others = all.bottomRows(4);
    const EnclosingEllipsoid e = enclosing_ellipsoid(targets, cfg.delta);
    const ExcludingRadii x = excluding_radii(others, e.center, e.axes, e.eigenvalues, cfg);
    EXPECT_TRUE((x.eigenvalues.array() >= e.eigenvalues.array()).all());
    const Ellipsoid outer(e.center, e.axes, x.radii);
    for (int j = 0; j < 4; ++j) {
      if (std::find(x.caught.begin(), x.caught.end(), j) != x.caught.end()) continue;
      // Brute-force distance with the dense pseudo-inverse.
      const double d = oracle::Mahalanobis(others.row(j).transpose(), e.center, e.axes, x.radii);
      EXPECT_GE(d, 1.0 - 1e-8);
    }
  }
}

TEST(PrecomputeClipTest, EnumeratesProperSubsets) {
  Mat e(3, 2);
  e << 0, 0, 5, 0, 0, 5;
  PrecomputeConfig cfg;
  const auto specs = precompute_clip("c", std::vector<int>{0, 1, 2}, e, cfg);
  ASSERT_EQ(specs.size(), 6u);
  EXPECT_EQ(specs[0].targets, (std::vector<int>{0}));
  EXPECT_EQ(specs[0].non_targets, (std::vector<int>{1, 2}));
  EXPECT_EQ(specs[2].targets, (std::vector<int>{0, 1}));
  EXPECT_EQ(specs[5].targets, (std::vector<int>{1, 2}));
  for (const auto& s : specs) {
    EXPECT_EQ(s.targets.size() + s.non_targets.size() + s.eliminated.size(), 3u);
  }
  EXPECT_TRUE(precompute_clip("c", std::vector<int>{1}, e, cfg).empty());
}

TEST(PrecomputeClipTest, NonTargetInsideIsEliminated) {
  // The middle point lies on the segment spanned by the outer two.
  Mat e(3, 2);
  e << -1, 0, 0, 0, 1, 0;
  PrecomputeConfig cfg;
  const auto specs = precompute_clip("c", std::vector<int>{0, 1, 2}, e, cfg);
  const QuerySpec* outer_pair = nullptr;
  for (const auto& s : specs) {
    if (s.targets == std::vector<int>{0, 2}) outer_pair = &s;
  }
  ASSERT_NE(outer_pair, nullptr);
  EXPECT_EQ(outer_pair->eliminated, (std::vector<int>{1}));
  EXPECT_TRUE(outer_pair->non_targets.empty());
  EXPECT_EQ(outer_pair->MixtureIndices(), (std::vector<int>{0, 2}));
}

TEST(PrecomputeClipTest, MembershipHoldsAlongInterpolation) {
  const auto cases = fixtures::RandomSpecs(1000, {2, 3, 4, 6, 8}, 21);
  int eliminated = 0;
  for (const auto& c : cases) {
    eliminated += !c.spec.eliminated.empty();
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const Ellipsoid q = c.spec.At(t);
      for (int i : c.spec.targets) {
        EXPECT_LE(mahalanobis(Vec(c.embeddings.row(i).transpose()), q), 1.0);
      }
      for (int j : c.spec.non_targets) {
        EXPECT_GE(mahalanobis(Vec(c.embeddings.row(j).transpose()), q), 1.0 - 1e-8);
      }
    }
  }
  EXPECT_GT(eliminated, 0);
}

TEST(SampleTrainingQueryTest, UniformWithinBounds) {
  const auto cases = fixtures::RandomSpecs(1, {4}, 5);
  const QuerySpec& spec = cases[0].spec;
  std::mt19937_64 rng(1);
  const int n = 10000;
  Vec sum = Vec::Zero(spec.dim());
  for (int k = 0; k < n; ++k) {
    const Ellipsoid q = sample_training_query(spec, rng);
    EXPECT_TRUE((q.radii.array() >= spec.inclusion_radii.array()).all());
    EXPECT_TRUE((q.radii.array() <= spec.exclusion_radii.array()).all());
    for (int i : spec.targets) EXPECT_TRUE(contains(q, Vec(cases[0].embeddings.row(i).transpose())));
    for (int j : spec.non_targets) {
      EXPECT_GE(mahalanobis(Vec(cases[0].embeddings.row(j).transpose()), q), 1.0 - 1e-8);
    }
    sum += q.radii;
  }
  const Vec mean = sum / n;
  for (Eigen::Index i = 0; i < spec.dim(); ++i) {
    const double w = spec.exclusion_radii[i] - spec.inclusion_radii[i];
    const double sigma = w / std::sqrt(12.0 * n);
    EXPECT_NEAR(mean[i], spec.inclusion_radii[i] + w / 2, 3 * sigma + 1e-15);
  }
}

TEST(SingleSourceQueryTest, ScalesExclusionRadii) {
  const auto cases = fixtures::RandomSpecs(200, {3}, 8);
  const QuerySpec* single = nullptr;
  const QuerySpec* multi = nullptr;
  for (const auto& c : cases) {
    if (c.spec.targets.size() == 1 && !single) single = &c.spec;
    if (c.spec.targets.size() > 1 && !multi) multi = &c.spec;
  }
  ASSERT_TRUE(single && multi);
  EXPECT_EQ(single_source_query(*single, 1.0).radii, single->exclusion_radii);
  EXPECT_LT((single_source_query(*single, 1e-3).radii - 1e-3 * single->exclusion_radii).norm(),
            1e-18);
  EXPECT_THROW(single_source_query(*single, 2.0), std::invalid_argument);
  EXPECT_THROW(single_source_query(*multi, 0.5), std::invalid_argument);
  EXPECT_EQ(DefaultAlphaGrid().size(), 10u);
}

TEST(SpecStoreTest, RoundTrip) {
  std::vector<QuerySpec> specs;
  for (const auto& c : fixtures::RandomSpecs(40, {2, 8}, 4)) specs.push_back(c.spec);
  const std::string bytes = EncodeSpecs(specs);
  EXPECT_EQ(bytes.substr(0, 7), "RSQSPEC");
  EXPECT_EQ(DecodeSpecs(bytes), specs);
  EXPECT_THROW(DecodeSpecs(bytes.substr(0, bytes.size() - 3)), std::runtime_error);
  EXPECT_THROW(DecodeSpecs("XXXXXXX"), std::runtime_error);
  const auto path = std::filesystem::temp_directory_path() / "regionsep_specs_test.rsq";
  WriteSpecs(path, specs);
  EXPECT_EQ(ReadSpecs(path), specs);
  std::filesystem::remove(path);
  EXPECT_FALSE(SpecSummary(specs).empty());
}

}  // namespace
}  // namespace regionsep
