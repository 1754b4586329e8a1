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

#include "regionsep/retrieval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace regionsep {
namespace {

// Solves (G + ridge I) x = b on the non-silent subset; silent entries stay 0.
SourceWeights SolveSubset(const Eigen::MatrixXd& gram, const Eigen::VectorXd& corr,
                          int num_targets, double ridge) {
  const Eigen::Index n = gram.rows();
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (gram(i, i) > 0) active.push_back(i);
  }
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
  if (!active.empty()) {
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd g(k, k);
    Eigen::VectorXd b(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      b[i] = corr[active[i]];
      for (Eigen::Index j = 0; j < k; ++j) g(i, j) = gram(active[i], active[j]);
    }
    g.diagonal().array() += ridge;
    const Eigen::VectorXd x = g.ldlt().solve(b);
    for (Eigen::Index i = 0; i < k; ++i) phi[active[i]] = x[i];
  }
  SourceWeights w;
  w.targets = phi.head(num_targets);
  w.non_targets = phi.tail(n - num_targets);
  w.degenerate = static_cast<Eigen::Index>(active.size()) != n;
  return w;
}

void CheckSources(const SampleMatrix& est, const std::vector<const SampleMatrix*>& s) {
  for (const auto* m : s) {
    if (m->rows() != est.rows() || m->cols() != est.cols()) {
      throw std::invalid_argument("fit_source_weights: source shape differs from estimate");
    }
  }
}

double SafeRatio(double num, double den) { return den > 0 ? num / den : 1.0; }

}  // namespace

SourceWeights fit_source_weights(const SampleMatrix& est,
                                 const std::vector<const SampleMatrix*>& targets,
                                 const std::vector<const SampleMatrix*>& non_targets,
                                 double ridge) {
  if (!(ridge >= 0)) throw std::invalid_argument("fit_source_weights: ridge must be >= 0");
  CheckSources(est, targets);
  CheckSources(est, non_targets);
  std::vector<const SampleMatrix*> all = targets;
  all.insert(all.end(), non_targets.begin(), non_targets.end());
  const auto n = static_cast<Eigen::Index>(all.size());
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (all[i]->squaredNorm() > 0) active.push_back(i);
  }
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
  const auto k = static_cast<Eigen::Index>(active.size());
  if (k > 0) {
    const Eigen::Index len = est.size();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(len + k, k);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(len + k);
    for (Eigen::Index j = 0; j < k; ++j) {
      a.col(j).head(len) = all[active[j]]->reshaped<Eigen::RowMajor>();
      a(len + j, j) = std::sqrt(ridge);
    }
    b.head(len) = est.reshaped<Eigen::RowMajor>();
    const Eigen::VectorXd x = a.householderQr().solve(b);
    for (Eigen::Index j = 0; j < k; ++j) phi[active[j]] = x[j];
  }
  SourceWeights w;
  const auto nt = static_cast<Eigen::Index>(targets.size());
  w.targets = phi.head(nt);
  w.non_targets = phi.tail(n - nt);
  w.degenerate = k != n;
  return w;
}

SourceWeights fit_source_weights_gram(const Eigen::MatrixXd& gram,
                                      const Eigen::VectorXd& correlations,
                                      int num_targets, double ridge) {
  if (gram.rows() != gram.cols() || gram.rows() != correlations.size() ||
      num_targets < 0 || num_targets > gram.rows()) {
    throw std::invalid_argument("fit_source_weights_gram: inconsistent sizes");
  }
  if (!(ridge >= 0)) throw std::invalid_argument("fit_source_weights_gram: ridge must be >= 0");
  return SolveSubset(gram, correlations, num_targets, ridge);
}

Eigen::VectorXd normalize_scores(const Eigen::VectorXd& phi) {
  return phi.cwiseAbs().cwiseMin(1.0);
}

RetrievalScores normalize_scores(const SourceWeights& w, std::string clip_id,
                                 int query_id) {
  RetrievalScores s;
  s.phi_hat = normalize_scores(w.targets);
  s.phi_hat_perp = normalize_scores(w.non_targets);
  s.raw = w;
  s.clip_id = std::move(clip_id);
  s.query_id = query_id;
  return s;
}

namespace {

void CheckScores(const std::vector<double>& scores, const std::vector<int>& truth) {
  if (scores.size() != truth.size()) {
    throw std::invalid_argument("metrics: score and truth lengths differ");
  }
}

std::vector<size_t> DescendingOrder(const std::vector<double>& scores) {
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<int>& truth) {
  CheckScores(scores, truth);
  const long positives = std::count_if(truth.begin(), truth.end(), [](int t) { return t != 0; });
  if (positives == 0) return std::nullopt;
  const auto order = DescendingOrder(scores);
  double ap = 0, prev_recall = 0;
  long tp = 0, seen = 0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    // Tied scores enter the ranking as one block.
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += truth[order[j]] != 0;
      ++seen;
      ++j;
    }
    const double recall = static_cast<double>(tp) / positives;
    ap += (recall - prev_recall) * (static_cast<double>(tp) / seen);
    prev_recall = recall;
    i = j;
  }
  return ap;
}

std::optional<double> roc_auc(const std::vector<double>& scores,
                              const std::vector<int>& truth) {
  CheckScores(scores, truth);
  const auto n = static_cast<long>(scores.size());
  const long positives = std::count_if(truth.begin(), truth.end(), [](int t) { return t != 0; });
  const long negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (size_t k = i; k < j; ++k) {
      if (truth[order[k]] != 0) rank_sum += avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  return (rank_sum - p * (p + 1) / 2) / (p * static_cast<double>(negatives));
}

std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& truth) {
  CheckScores(scores, truth);
  const long positives = std::count_if(truth.begin(), truth.end(), [](int t) { return t != 0; });
  const long negatives = static_cast<long>(truth.size()) - positives;
  const auto order = DescendingOrder(scores);
  std::vector<RocPoint> points;
  points.push_back({order.empty() ? 1.0 : scores[order.front()] + 1.0, 0.0, 0.0});
  long tp = 0, fp = 0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (truth[order[j]] != 0 ? tp : fp) += 1;
      ++j;
    }
    points.push_back({scores[order[i]], SafeRatio(fp, negatives), SafeRatio(tp, positives)});
    i = j;
  }
  return points;
}

BinaryMetrics binary_metrics(const std::vector<double>& scores,
                             const std::vector<int>& truth, double threshold) {
  CheckScores(scores, truth);
  BinaryMetrics m;
  m.count = static_cast<int>(scores.size());
  m.positives = static_cast<int>(
      std::count_if(truth.begin(), truth.end(), [](int t) { return t != 0; }));
  m.ap = average_precision(scores, truth);
  m.rocauc = roc_auc(scores, truth);
  long tp = 0, fp = 0, tn = 0, fn = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool pos = truth[i] != 0;
    tp += pred && pos;
    fp += pred && !pos;
    tn += !pred && !pos;
    fn += !pred && pos;
  }
  m.accuracy = SafeRatio(tp + tn, static_cast<double>(scores.size()));
  m.precision = SafeRatio(tp, tp + fp);
  m.recall = SafeRatio(tp, tp + fn);
  m.f1 = m.precision + m.recall > 0
             ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0;
  // Best F1 over thresholds at distinct scores, highest threshold on ties.
  const auto order = DescendingOrder(scores);
  long ctp = 0, cfp = 0;
  m.best_f1 = -1;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (truth[order[j]] != 0 ? ctp : cfp) += 1;
      ++j;
    }
    const double p = SafeRatio(ctp, ctp + cfp);
    const double r = SafeRatio(ctp, m.positives);
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0;
    if (f > m.best_f1) {
      m.best_f1 = f;
      m.best_threshold = scores[order[i]];
    }
    i = j;
  }
  if (m.best_f1 < 0) m.best_f1 = 0;
  return m;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

namespace {

struct Pooled {
  std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> by_class;
  std::vector<double> scores;
  std::vector<int> truth;
};

Pooled Pool(const std::vector<QueryRecord>& records) {
  Pooled p;
  for (const auto& r : records) {
    for (const auto& s : r.stems) {
      auto& [sc, tr] = p.by_class[s.label];
      sc.push_back(s.score);
      tr.push_back(s.is_target);
      p.scores.push_back(s.score);
      p.truth.push_back(s.is_target);
    }
  }
  return p;
}

// Support-weighted mean AP over classes with positives.
std::optional<double> WeightedMap(const Pooled& p) {
  double num = 0, den = 0;
  for (const auto& [label, st] : p.by_class) {
    const auto ap = average_precision(st.first, st.second);
    if (!ap) continue;
    const double support = static_cast<double>(
        std::count(st.second.begin(), st.second.end(), 1));
    num += support * *ap;
    den += support;
  }
  if (den == 0) return std::nullopt;
  return num / den;
}

}  // namespace

std::vector<CellMetrics> group_analysis(const std::vector<QueryRecord>& records) {
  std::map<std::pair<int, int>, std::vector<const QueryRecord*>> groups;
  for (const auto& r : records) groups[{r.mixture_count, r.target_count}].push_back(&r);
  std::vector<CellMetrics> cells;
  for (const auto& [key, group] : groups) {
    CellMetrics c;
    c.mixture_count = key.first;
    c.target_count = key.second;
    c.queries = static_cast<int>(group.size());
    c.target_ratio = key.first > 0 ? static_cast<double>(key.second) / key.first : 0;
    std::vector<double> snrs;
    std::vector<QueryRecord> copy;
    for (const auto* r : group) {
      snrs.push_back(r->snr_db);
      copy.push_back(*r);
    }
    if (!snrs.empty()) c.median_snr = median(snrs);
    c.weighted_map = WeightedMap(Pool(copy));
    cells.push_back(c);
  }
  return cells;
}

MetricsReport compute_metrics(const std::vector<QueryRecord>& records, double threshold) {
  if (records.empty()) throw std::invalid_argument("compute_metrics: no records");
  MetricsReport report;
  report.threshold = threshold;
  const Pooled p = Pool(records);
  if (p.scores.empty()) throw std::invalid_argument("compute_metrics: no scored stems");
  for (const auto& [label, st] : p.by_class) {
    report.per_class.push_back({label, binary_metrics(st.first, st.second, threshold)});
  }
  report.micro = binary_metrics(p.scores, p.truth, threshold);

  double n = 0, ap_sum = 0, ap_n = 0, auc_sum = 0, auc_n = 0;
  double w = 0, wap = 0, wap_n = 0, wauc = 0, wauc_n = 0;
  for (const auto& c : report.per_class) {
    const auto& m = c.metrics;
    n += 1;
    report.macro.accuracy += m.accuracy;
    report.macro.precision += m.precision;
    report.macro.recall += m.recall;
    report.macro.f1 += m.f1;
    if (m.ap) { ap_sum += *m.ap; ap_n += 1; }
    if (m.rocauc) { auc_sum += *m.rocauc; auc_n += 1; }
    const double s = m.positives;
    w += s;
    report.weighted.accuracy += s * m.accuracy;
    report.weighted.precision += s * m.precision;
    report.weighted.recall += s * m.recall;
    report.weighted.f1 += s * m.f1;
    if (m.ap) { wap += s * *m.ap; wap_n += s; }
    if (m.rocauc) { wauc += s * *m.rocauc; wauc_n += s; }
  }
  report.macro.accuracy /= n;
  report.macro.precision /= n;
  report.macro.recall /= n;
  report.macro.f1 /= n;
  if (ap_n > 0) report.macro.map = ap_sum / ap_n;
  if (auc_n > 0) report.macro.rocauc = auc_sum / auc_n;
  if (w > 0) {
    report.weighted.accuracy /= w;
    report.weighted.precision /= w;
    report.weighted.recall /= w;
    report.weighted.f1 /= w;
  }
  if (wap_n > 0) report.weighted.map = wap / wap_n;
  if (wauc_n > 0) report.weighted.rocauc = wauc / wauc_n;

  report.cells = group_analysis(records);
  std::vector<double> snrs;
  for (const auto& r : records) snrs.push_back(r.snr_db);
  report.median_snr = median(snrs);
  return report;
}

namespace {

std::string Num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}
std::string Opt(const std::optional<double>& v) { return v ? Num(*v) : ""; }

}  // namespace

std::string MetricsTableCsv(const MetricsReport& r) {
  std::string out =
      "scope,name,support,count,ap,rocauc,accuracy,precision,recall,f1,best_f1,"
      "best_threshold\n";
  auto row = [&out](const std::string& scope, const std::string& name,
                    const BinaryMetrics& m) {
    out += scope + "," + name + "," + std::to_string(m.positives) + "," +
           std::to_string(m.count) + "," + Opt(m.ap) + "," + Opt(m.rocauc) + "," +
           Num(m.accuracy) + "," + Num(m.precision) + "," + Num(m.recall) + "," +
           Num(m.f1) + "," + Num(m.best_f1) + "," + Num(m.best_threshold) + "\n";
  };
  for (const auto& c : r.per_class) row("class", c.label, c.metrics);
  row("aggregate", "micro", r.micro);
  auto agg = [&out](const std::string& name, const AggregateMetrics& a) {
    out += "aggregate," + name + ",,," + Opt(a.map) + "," + Opt(a.rocauc) + "," +
           Num(a.accuracy) + "," + Num(a.precision) + "," + Num(a.recall) + "," +
           Num(a.f1) + ",,\n";
  };
  agg("macro", r.macro);
  agg("weighted", r.weighted);
  return out;
}

std::string CellsCsv(const std::vector<CellMetrics>& cells) {
  std::string out = "mixture_count,target_count,target_ratio,queries,median_snr_db,weighted_map\n";
  for (const auto& c : cells) {
    out += std::to_string(c.mixture_count) + "," + std::to_string(c.target_count) + "," +
           Num(c.target_ratio) + "," + std::to_string(c.queries) + "," +
           Opt(c.median_snr) + "," + Opt(c.weighted_map) + "\n";
  }
  return out;
}

std::string CellMatrixCsv(const std::vector<CellMetrics>& cells, bool snr) {
  int max_mix = 0;
  for (const auto& c : cells) max_mix = std::max(max_mix, c.mixture_count);
  std::string out = "mixture_count";
  for (int t = 1; t < max_mix; ++t) out += "," + std::to_string(t);
  out += "\n";
  for (int m = 2; m <= max_mix; ++m) {
    out += std::to_string(m);
    for (int t = 1; t < max_mix; ++t) {
      out += ",";
      for (const auto& c : cells) {
        if (c.mixture_count == m && c.target_count == t) {
          out += Opt(snr ? c.median_snr : c.weighted_map);
        }
      }
    }
    out += "\n";
  }
  return out;
}

std::string EncodeQueryRecords(const std::vector<QueryRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j;
    j["clip_id"] = r.clip_id;
    j["query_id"] = r.query_id;
    j["mode"] = r.mode;
    j["alpha"] = r.alpha;
    j["mixture_count"] = r.mixture_count;
    j["target_count"] = r.target_count;
    j["snr_db"] = r.snr_db;
    j["degenerate"] = r.degenerate;
    nlohmann::json stems = nlohmann::json::array();
    for (const auto& s : r.stems) {
      stems.push_back({{"label", s.label}, {"target", s.is_target},
                       {"score", s.score}, {"raw", s.raw}});
    }
    j["stems"] = stems;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<QueryRecord> DecodeQueryRecords(const std::string& text) {
  std::vector<QueryRecord> records;
  std::istringstream in(text);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      QueryRecord r;
      r.clip_id = j.at("clip_id").get<std::string>();
      r.query_id = j.at("query_id").get<int>();
      r.mode = j.at("mode").get<std::string>();
      r.alpha = j.at("alpha").get<double>();
      r.mixture_count = j.at("mixture_count").get<int>();
      r.target_count = j.at("target_count").get<int>();
      r.snr_db = j.at("snr_db").get<double>();
      r.degenerate = j.at("degenerate").get<bool>();
      for (const auto& s : j.at("stems")) {
        r.stems.push_back({s.at("label").get<std::string>(), s.at("target").get<bool>(),
                           s.at("score").get<double>(), s.at("raw").get<double>()});
      }
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("score records: row " + std::to_string(row) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace regionsep
