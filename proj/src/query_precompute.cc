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

#include "regionsep/query_precompute.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace regionsep {
namespace {

struct Eigenbasis {
  Eigen::MatrixXd vectors;  // columns, eigenvalues descending
  Eigen::VectorXd values;   // clamped at zero
};

Eigenbasis SymmetricEigen(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed");
  }
  const Eigen::Index d = m.rows();
  Eigenbasis out{Eigen::MatrixXd(d, d), Eigen::VectorXd(d)};
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::Index src = d - 1 - i;
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    out.vectors.col(i) = v;
    out.values[i] = std::max(eig.eigenvalues()[src], 0.0);
  }
  return out;
}

// Quadratic form against the pseudo-inverse of V diag(values) V^T, keeping
// only axes whose root eigenvalue reaches eps.
double PseudoMahalanobis(const Eigen::VectorXd& offset, const Eigenbasis& basis,
                         double eps) {
  const Eigen::VectorXd local = basis.vectors.transpose() * offset;
  double d = 0.0;
  for (Eigen::Index i = 0; i < local.size(); ++i) {
    if (std::sqrt(basis.values[i]) >= eps) {
      d += local[i] * local[i] / basis.values[i];
    }
  }
  return d;
}

Eigen::MatrixXd SecondMoment(const Eigen::MatrixXd& points,
                             const Eigen::VectorXd& about) {
  const Eigen::MatrixXd centered = points.rowwise() - about.transpose();
  return centered.transpose() * centered / static_cast<double>(points.rows());
}

Eigen::MatrixXd GatherRows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  }
  return out;
}

}  // namespace

void PrecomputeConfig::Validate() const {
  if (!std::isfinite(level_gate_db)) {
    throw std::invalid_argument("precompute: level gate must be finite");
  }
  if (!(delta > 0.0)) throw std::invalid_argument("precompute: delta must be > 0");
  if (!(eps > 0.0)) throw std::invalid_argument("precompute: eps must be > 0");
  if (!(no_nontarget_ratio > 1.0)) {
    throw std::invalid_argument("precompute: no-non-target ratio must be > 1");
  }
  if (max_subset_card < 1 || max_specs_per_clip < 1) {
    throw std::invalid_argument("precompute: subset limits must be positive");
  }
}

std::vector<int> QuerySpec::MixtureIndices() const {
  std::vector<int> out = targets;
  out.insert(out.end(), non_targets.begin(), non_targets.end());
  std::sort(out.begin(), out.end());
  return out;
}

Ellipsoid QuerySpec::At(double t) const {
  return {center, axes, interpolate(inclusion_radii, exclusion_radii, t)};
}

std::vector<int> available_sources(const std::vector<SampleMatrix>& stems,
                                   double gate_db) {
  std::vector<int> out;
  for (size_t i = 0; i < stems.size(); ++i) {
    if (dbrms(stems[i]) >= gate_db) out.push_back(static_cast<int>(i));
  }
  return out;
}

EnclosingEllipsoid enclosing_ellipsoid(const Eigen::MatrixXd& points,
                                       double delta, double eps) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  if (n < 1) throw std::invalid_argument("enclosing ellipsoid: no points");
  EnclosingEllipsoid out;
  out.center = points.colwise().mean().transpose();
  auto as_ball = [&] {
    out.axes = Eigen::MatrixXd::Identity(d, d);
    out.eigenvalues = Eigen::VectorXd::Constant(d, delta);
    out.radii = out.eigenvalues.cwiseSqrt();
    out.kappa = 1.0;
  };
  if (n == 1) {
    out.covariance = Eigen::MatrixXd::Zero(d, d);
    as_ball();
    return out;
  }
  out.covariance = SecondMoment(points, out.center);
  const Eigenbasis basis = SymmetricEigen(out.covariance);
  double kappa = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    kappa = std::max(kappa, PseudoMahalanobis(points.row(j).transpose() - out.center,
                                              basis, eps));
  }
  if (!(kappa > 0.0)) {
    // Coincident points: no direction is resolvable.
    as_ball();
    return out;
  }
  out.axes = basis.vectors;
  // The farthest point sits on the boundary; rounding in the radii can push
  // it just outside, so kappa is inflated until every point tests inside.
  for (double margin = 1e-12;; margin *= 4) {
    out.kappa = kappa * (1.0 + margin);
    out.eigenvalues = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (std::sqrt(basis.values[i]) >= eps) {
        out.eigenvalues[i] = out.kappa * basis.values[i];
      }
    }
    out.radii = out.eigenvalues.cwiseSqrt();
    const Ellipsoid e = out.AsEllipsoid();
    bool all_inside = true;
    for (Eigen::Index j = 0; j < n && all_inside; ++j) {
      all_inside = contains(e, points.row(j).transpose(), eps);
    }
    if (all_inside || margin > 1e-3) break;
  }
  return out;
}

ExcludingRadii excluding_radii(const Eigen::MatrixXd& non_targets,
                               const Eigen::VectorXd& center,
                               const Eigen::MatrixXd& axes,
                               const Eigen::VectorXd& inclusion_eigenvalues,
                               const PrecomputeConfig& cfg) {
  const Eigen::Index d = center.size();
  ExcludingRadii out;
  if (non_targets.rows() == 0) {
    const double floor = std::sqrt(cfg.delta);
    out.radii = inclusion_eigenvalues.cwiseSqrt().cwiseMax(floor) *
                cfg.no_nontarget_ratio;
    out.eigenvalues = out.radii.array().square().matrix();
    return out;
  }
  if (non_targets.cols() != d) {
    throw std::invalid_argument("excluding radii: dimension mismatch");
  }
  const Eigen::MatrixXd moment = SecondMoment(non_targets, center);
  const Eigenbasis basis = SymmetricEigen(moment);
  double kappa = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < non_targets.rows(); ++j) {
    kappa = std::min(kappa, PseudoMahalanobis(
                                non_targets.row(j).transpose() - center, basis,
                                cfg.eps));
  }
  out.kappa = kappa;
  const Eigen::VectorXd projected =
      (axes.transpose() * (kappa * moment) * axes).diagonal();
  out.eigenvalues = projected.cwiseMax(inclusion_eigenvalues);
  out.radii = out.eigenvalues.cwiseSqrt();
  const Ellipsoid outer(center, axes, out.radii);
  for (Eigen::Index j = 0; j < non_targets.rows(); ++j) {
    const Eigen::VectorXd z = non_targets.row(j).transpose();
    if (mahalanobis(z, outer, cfg.eps) < 1.0 - cfg.catch_margin) {
      out.caught.push_back(static_cast<int>(j));
    }
  }
  return out;
}

std::vector<QuerySpec> precompute_clip(const std::string& clip_id,
                                       const std::vector<int>& available,
                                       const Eigen::MatrixXd& embeddings,
                                       const PrecomputeConfig& cfg) {
  cfg.Validate();
  std::vector<QuerySpec> specs;
  const int n = static_cast<int>(available.size());
  if (n < 2) return specs;
  if (n > 30) throw std::invalid_argument("precompute: too many available stems");
  for (int idx : available) {
    if (idx < 0 || idx >= embeddings.rows()) {
      throw std::invalid_argument("precompute: stem index without embedding");
    }
  }
  const uint64_t full = (uint64_t{1} << n) - 1;
  for (uint64_t mask = 1; mask < full; ++mask) {
    if (static_cast<int>(specs.size()) >= cfg.max_specs_per_clip) break;
    if (std::popcount(mask) > cfg.max_subset_card) continue;
    std::vector<int> targets, others;
    for (int i = 0; i < n; ++i) {
      ((mask >> i) & 1u ? targets : others).push_back(available[i]);
    }
    const EnclosingEllipsoid enc =
        enclosing_ellipsoid(GatherRows(embeddings, targets), cfg.delta, cfg.eps);
    const Ellipsoid inner = enc.AsEllipsoid();

    QuerySpec spec;
    spec.clip_id = clip_id;
    spec.center = enc.center;
    spec.axes = enc.axes;
    spec.inclusion_radii = enc.radii;
    spec.targets = targets;
    std::vector<int> outside;
    for (int j : others) {
      const Eigen::VectorXd z = embeddings.row(j).transpose();
      (mahalanobis(z, inner, cfg.eps) <= 1.0 ? spec.eliminated : outside)
          .push_back(j);
    }
    const ExcludingRadii exc =
        excluding_radii(GatherRows(embeddings, outside), enc.center, enc.axes,
                        enc.eigenvalues, cfg);
    spec.exclusion_radii = exc.radii;
    std::vector<bool> caught(outside.size(), false);
    for (int k : exc.caught) caught[k] = true;
    for (size_t k = 0; k < outside.size(); ++k) {
      (caught[k] ? spec.eliminated : spec.non_targets).push_back(outside[k]);
    }
    std::sort(spec.eliminated.begin(), spec.eliminated.end());
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::vector<QuerySpec> precompute_clip(const std::string& clip_id,
                                       const std::vector<SampleMatrix>& stems,
                                       const Eigen::MatrixXd& embeddings,
                                       const PrecomputeConfig& cfg) {
  if (static_cast<Eigen::Index>(stems.size()) != embeddings.rows()) {
    throw std::invalid_argument("precompute: embeddings not aligned with stems");
  }
  return precompute_clip(clip_id, available_sources(stems, cfg.level_gate_db),
                         embeddings, cfg);
}

Ellipsoid sample_training_query(const QuerySpec& spec, std::mt19937_64& rng) {
  Eigen::VectorXd radii(spec.dim());
  for (Eigen::Index i = 0; i < spec.dim(); ++i) {
    const double lo = spec.inclusion_radii[i];
    const double hi = spec.exclusion_radii[i];
    radii[i] = lo + Uniform01(rng) * (hi - lo);
  }
  return {spec.center, spec.axes, radii};
}

Ellipsoid validation_query(const QuerySpec& spec) { return spec.At(0.5); }

Ellipsoid single_source_query(const QuerySpec& spec, double alpha) {
  if (spec.targets.size() != 1) {
    throw std::invalid_argument("single-source query needs exactly one target");
  }
  if (!(alpha >= 1e-3 && alpha <= 1.0)) {
    throw std::invalid_argument("single-source alpha must lie in [1e-3, 1]");
  }
  return {spec.center, spec.axes, alpha * spec.exclusion_radii};
}

namespace {

template <typename T>
void Put(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  template <typename T>
  T Get() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw std::runtime_error("spec store: truncated record");
    }
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string GetString(size_t n) {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("spec store: truncated");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  size_t pos_ = 0;
};

void PutIndices(std::string& out, const std::vector<int>& v) {
  Put<uint32_t>(out, static_cast<uint32_t>(v.size()));
  for (int i : v) Put<uint32_t>(out, static_cast<uint32_t>(i));
}

std::vector<int> GetIndices(Reader& r) {
  const auto n = r.Get<uint32_t>();
  std::vector<int> v(n);
  for (auto& i : v) i = static_cast<int>(r.Get<uint32_t>());
  return v;
}

}  // namespace

std::string EncodeSpecs(const std::vector<QuerySpec>& specs) {
  std::string out(kSpecMagic, sizeof(kSpecMagic));
  Put<uint8_t>(out, kSpecVersion);
  Put<uint32_t>(out, static_cast<uint32_t>(specs.size()));
  for (const QuerySpec& s : specs) {
    const auto d = static_cast<uint32_t>(s.dim());
    Put<uint32_t>(out, static_cast<uint32_t>(s.clip_id.size()));
    out += s.clip_id;
    Put<uint32_t>(out, d);
    for (uint32_t i = 0; i < d; ++i) Put<double>(out, s.center[i]);
    for (uint32_t i = 0; i < d; ++i) {
      for (uint32_t j = 0; j < d; ++j) Put<double>(out, s.axes(i, j));
    }
    for (uint32_t i = 0; i < d; ++i) Put<double>(out, s.inclusion_radii[i]);
    for (uint32_t i = 0; i < d; ++i) Put<double>(out, s.exclusion_radii[i]);
    PutIndices(out, s.targets);
    PutIndices(out, s.non_targets);
    PutIndices(out, s.eliminated);
  }
  return out;
}

std::vector<QuerySpec> DecodeSpecs(const std::string& bytes) {
  if (bytes.size() < sizeof(kSpecMagic) + 5 ||
      std::memcmp(bytes.data(), kSpecMagic, sizeof(kSpecMagic)) != 0) {
    throw std::runtime_error("spec store: bad magic header");
  }
  Reader r(bytes);
  r.GetString(sizeof(kSpecMagic));
  const auto version = r.Get<uint8_t>();
  if (version != kSpecVersion) {
    throw std::runtime_error("spec store: unsupported version " +
                             std::to_string(version));
  }
  const auto count = r.Get<uint32_t>();
  std::vector<QuerySpec> specs(count);
  for (QuerySpec& s : specs) {
    s.clip_id = r.GetString(r.Get<uint32_t>());
    const auto d = r.Get<uint32_t>();
    s.center.resize(d);
    s.axes.resize(d, d);
    s.inclusion_radii.resize(d);
    s.exclusion_radii.resize(d);
    for (uint32_t i = 0; i < d; ++i) s.center[i] = r.Get<double>();
    for (uint32_t i = 0; i < d; ++i) {
      for (uint32_t j = 0; j < d; ++j) s.axes(i, j) = r.Get<double>();
    }
    for (uint32_t i = 0; i < d; ++i) s.inclusion_radii[i] = r.Get<double>();
    for (uint32_t i = 0; i < d; ++i) s.exclusion_radii[i] = r.Get<double>();
    s.targets = GetIndices(r);
    s.non_targets = GetIndices(r);
    s.eliminated = GetIndices(r);
  }
  if (!r.done()) throw std::runtime_error("spec store: trailing bytes");
  return specs;
}

void WriteSpecs(const std::filesystem::path& path,
                const std::vector<QuerySpec>& specs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::string bytes = EncodeSpecs(specs);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<QuerySpec> ReadSpecs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return DecodeSpecs(ss.str());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string SpecSummary(const std::vector<QuerySpec>& specs) {
  auto list = [](const std::vector<int>& v) {
    std::string s = "[";
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(v[i]);
    }
    return s + "]";
  };
  std::ostringstream out;
  out << "# clip\tquery\tD\ttargets\tnon_targets\teliminated\t"
         "min_inclusion_radius\tmax_exclusion_radius\n";
  std::string last_clip;
  int query = 0;
  for (const QuerySpec& s : specs) {
    if (s.clip_id != last_clip) {
      last_clip = s.clip_id;
      query = 0;
    }
    out << s.clip_id << '\t' << query++ << '\t' << s.dim() << '\t'
        << list(s.targets) << '\t' << list(s.non_targets) << '\t'
        << list(s.eliminated) << '\t' << std::setprecision(6)
        << s.inclusion_radii.minCoeff() << '\t' << s.exclusion_radii.maxCoeff()
        << '\n';
  }
  return out.str();
}

}  // namespace regionsep
