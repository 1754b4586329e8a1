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

// Least-squares source-presence scores and retrieval metrics.
//
// A separator output is projected onto the ground-truth stems of its mixture;
// the clamped magnitudes of the weights act as classification scores for
// "this stem is part of the target".

#ifndef REGIONSEP_RETRIEVAL_H_
#define REGIONSEP_RETRIEVAL_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regionsep/signal.h"

namespace regionsep {

inline constexpr double kDefaultRidge = 1e-8;

struct SourceWeights {
  Eigen::VectorXd targets;      // phi~
  Eigen::VectorXd non_targets;  // phi~ perp
  // Set when some source is all-zero; its weight is reported as 0.
  bool degenerate = false;
};

// argmin |est - sum_i phi_i s_i|_F^2 + ridge |phi|^2 over the flattened
// signals, solved by Householder QR of the ridge-augmented system.
SourceWeights fit_source_weights(const SampleMatrix& est,
                                 const std::vector<const SampleMatrix*>& targets,
                                 const std::vector<const SampleMatrix*>& non_targets,
                                 double ridge = kDefaultRidge);

// Same problem from the Gram matrix of [targets, non_targets] and the
// correlations <s_i, est>. Used where the Gram matrix is shared by many
// queries over one clip.
SourceWeights fit_source_weights_gram(const Eigen::MatrixXd& gram,
                                      const Eigen::VectorXd& correlations,
                                      int num_targets, double ridge = kDefaultRidge);

struct RetrievalScores {
  Eigen::VectorXd phi_hat;
  Eigen::VectorXd phi_hat_perp;
  SourceWeights raw;
  std::string clip_id;
  int query_id = 0;
};

// Elementwise min(1, |phi|).
Eigen::VectorXd normalize_scores(const Eigen::VectorXd& phi);
RetrievalScores normalize_scores(const SourceWeights& w, std::string clip_id = "",
                                 int query_id = 0);

// Ranking metrics over binary truth (1 = positive). Absent when undefined:
// AP without positives, ROC AUC without both classes.
std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<int>& truth);
std::optional<double> roc_auc(const std::vector<double>& scores,
                              const std::vector<int>& truth);

struct RocPoint {
  double threshold = 0;
  double fpr = 0;
  double tpr = 0;
};
// Points for thresholds at each distinct score, from (0,0) to (1,1).
std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& truth);

struct BinaryMetrics {
  int count = 0;
  int positives = 0;
  std::optional<double> ap;
  std::optional<double> rocauc;
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double best_f1 = 0;
  double best_threshold = 0;
};

// Thresholded metrics predict positive when score >= threshold. Empty ratios
// (no predictions, no positives) count as 1.
BinaryMetrics binary_metrics(const std::vector<double>& scores,
                             const std::vector<int>& truth, double threshold = 0.5);

// One scored stem of one query.
struct ScoredStem {
  std::string label;
  bool is_target = false;
  double score = 0;
  double raw = 0;
};

struct QueryRecord {
  std::string clip_id;
  int query_id = 0;
  std::string mode;  // "multi-source" or "single-source"
  double alpha = 0;  // single-source only
  int mixture_count = 0;
  int target_count = 0;
  double snr_db = 0;
  bool degenerate = false;
  std::vector<ScoredStem> stems;
};

struct ClassMetrics {
  std::string label;
  BinaryMetrics metrics;
};

struct AggregateMetrics {
  std::optional<double> map;
  std::optional<double> rocauc;
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct CellMetrics {
  int mixture_count = 0;
  int target_count = 0;
  int queries = 0;
  std::optional<double> median_snr;
  std::optional<double> weighted_map;
  double target_ratio = 0;  // target_count / mixture_count
};

struct MetricsReport {
  double threshold = 0.5;
  std::vector<ClassMetrics> per_class;  // sorted by label
  BinaryMetrics micro;
  AggregateMetrics macro;
  AggregateMetrics weighted;  // by per-class positive support
  std::vector<CellMetrics> cells;
  std::optional<double> median_snr;
};

MetricsReport compute_metrics(const std::vector<QueryRecord>& records,
                              double threshold = 0.5);
// Median SNR and weighted mAP per (mixture count, target count), sorted by key.
std::vector<CellMetrics> group_analysis(const std::vector<QueryRecord>& records);

double median(std::vector<double> v);

// Plot-ready CSV outputs.
std::string MetricsTableCsv(const MetricsReport& report);
std::string CellsCsv(const std::vector<CellMetrics>& cells);
// Grid with mixture count rows and target count columns; empty = absent.
std::string CellMatrixCsv(const std::vector<CellMetrics>& cells, bool snr);

// Raw per-query records, one JSON object per line.
std::string EncodeQueryRecords(const std::vector<QueryRecord>& records);
std::vector<QueryRecord> DecodeQueryRecords(const std::string& text);

}  // namespace regionsep

#endif  // REGIONSEP_RETRIEVAL_H_
