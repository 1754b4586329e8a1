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

#include "regionsep/pipeline.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "regionsep/wav.h"

namespace regionsep {

namespace fs = std::filesystem;

namespace {

void Emit(const Log& log, const std::string& msg) {
  if (log) log(msg);
}

std::string Hint(const fs::path& manifest_path, const char* command) {
  return std::string("; run `regionsep_cli ") + command + " --manifest " +
         manifest_path.string() + "` first";
}

Eigen::Map<const Eigen::VectorXd> Flat(const SampleMatrix& m) {
  return {m.data(), m.size()};
}

}  // namespace

void WriteTextFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << text;
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string ReadTextFile(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ArtifactError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Manifest write_dataset(const std::vector<StemTrack>& tracks, const PipelineConfig& cfg,
                       const fs::path& dir, const Log& log) {
  fs::create_directories(dir);
  Manifest m;
  m.root = dir;
  m.window_seconds = cfg.window_seconds;
  m.stride_seconds = cfg.stride_seconds;
  m.ratios = cfg.splits;
  m.seed = cfg.seed;
  std::set<std::string> classes;
  std::set<std::string> ids;
  for (const StemTrack& track : tracks) {
    track.Validate();
    if (!ids.insert(track.track_id).second) {
      throw std::invalid_argument("duplicate track id " + track.track_id);
    }
    ManifestTrack entry;
    entry.track_id = track.track_id;
    entry.split = assign_split(track.track_id, cfg.splits);
    entry.sample_rate = track.sample_rate;
    entry.channels = static_cast<int>(track.channels());
    entry.frames = track.frames();
    const fs::path audio_dir = fs::path("audio") / track.track_id;
    fs::create_directories(dir / audio_dir);
    for (Eigen::Index i = 0; i < track.num_stems(); ++i) {
      const fs::path rel = audio_dir / (track.stem_ids[i] + ".wav");
      WriteWav(dir / rel, AudioChunk(track.stems[i], track.sample_rate));
      entry.stems.push_back({track.stem_ids[i], track.labels[i], rel.generic_string()});
      classes.insert(track.labels[i]);
    }
    std::string warning;
    for (const ClipIndex& c :
         chunk_track(track, cfg.window_seconds, cfg.stride_seconds, &warning)) {
      entry.clips.push_back({c.clip_id, c.start_sample, c.length_samples, {}});
    }
    if (!warning.empty()) Emit(log, "warning: " + warning);
    m.tracks.push_back(std::move(entry));
  }
  m.classes.assign(classes.begin(), classes.end());
  m.Save(dir / kManifestName);
  Emit(log, "wrote " + std::to_string(tracks.size()) + " tracks to " + dir.string());
  return m;
}

Manifest generate_dataset(const PipelineConfig& cfg, const fs::path& dir, const Log& log) {
  std::vector<StemTrack> tracks;
  for (int i = 0; i < cfg.data.num_tracks; ++i) {
    tracks.push_back(generate_synthetic_track(cfg.data, cfg.seed, i));
  }
  return write_dataset(tracks, cfg, dir, log);
}

Manifest ingest_dataset(const PipelineConfig& cfg, const fs::path& root, const fs::path& dir,
                        const Log& log) {
  if (!fs::is_directory(root)) throw ArtifactError(root.string() + ": not a directory");
  std::vector<fs::path> folders;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) folders.push_back(e.path());
  }
  std::sort(folders.begin(), folders.end());
  if (folders.empty()) throw ArtifactError(root.string() + ": no track folders");
  std::vector<StemTrack> tracks;
  for (const fs::path& f : folders) tracks.push_back(ingest_stem_folder(f));
  return write_dataset(tracks, cfg, dir, log);
}

PrecomputeSummary precompute_dataset(const PipelineConfig& cfg, const fs::path& manifest_path,
                                     const Log& log) {
  if (!fs::exists(manifest_path)) {
    throw ArtifactError("no manifest at " + manifest_path.string() +
                        "; run `regionsep_cli gen-data --out <dir>` first");
  }
  Manifest m = Manifest::Load(manifest_path);
  PrecomputeSummary summary;

  // Raw embeddings per track, clip, stem.
  std::vector<std::vector<Eigen::MatrixXd>> raw(m.tracks.size());
  for (size_t t = 0; t < m.tracks.size(); ++t) {
    ManifestTrack& entry = m.tracks[t];
    const StemTrack track = LoadTrack(m, entry);
    const MockEmbedder embed(cfg.embedding, track.sample_rate);
    EmbeddingSet set;
    set.vectors.resize(static_cast<Eigen::Index>(entry.clips.size()) * track.num_stems(),
                       cfg.embedding.dim);
    Eigen::Index row = 0;
    for (ManifestClip& clip : entry.clips) {
      std::vector<SampleMatrix> stems;
      Eigen::MatrixXd e(track.num_stems(), cfg.embedding.dim);
      for (Eigen::Index s = 0; s < track.num_stems(); ++s) {
        stems.push_back(track.stems[s].middleCols(clip.start, clip.length));
        e.row(s) = embed(AudioChunk(stems.back(), track.sample_rate)).transpose();
        set.vectors.row(row++) = e.row(s);
        set.source_ids.push_back(clip.clip_id + "/" + track.stem_ids[s]);
      }
      clip.available = available_sources(stems, cfg.precompute.level_gate_db);
      raw[t].push_back(std::move(e));
      ++summary.clips;
    }
    entry.embeddings = "embeddings/" + entry.track_id + ".jsonl";
    fs::create_directories(m.Resolve("embeddings"));
    export_embeddings(m.Resolve(entry.embeddings), set);
    Emit(log, "embedded " + entry.track_id);
  }

  std::vector<Eigen::VectorXd> train_rows;
  for (size_t t = 0; t < m.tracks.size(); ++t) {
    if (m.tracks[t].split != Split::kTrain) continue;
    for (size_t c = 0; c < m.tracks[t].clips.size(); ++c) {
      for (int s : m.tracks[t].clips[c].available) train_rows.push_back(raw[t][c].row(s));
    }
  }
  if (train_rows.size() < 2) {
    throw ArtifactError("too few training embeddings to fit the PCA; check the splits");
  }
  Eigen::MatrixXd data(static_cast<Eigen::Index>(train_rows.size()), cfg.embedding.dim);
  for (size_t i = 0; i < train_rows.size(); ++i) data.row(static_cast<Eigen::Index>(i)) = train_rows[i];
  const Pca pca = fit_pca(data, cfg.pca_dim);
  summary.explained_variance = pca.ExplainedVarianceRatio();
  m.pca = "pca.json";
  SavePca(m.Resolve(m.pca), pca);

  fs::create_directories(m.Resolve("specs"));
  for (size_t t = 0; t < m.tracks.size(); ++t) {
    ManifestTrack& entry = m.tracks[t];
    std::vector<QuerySpec> all;
    for (size_t c = 0; c < entry.clips.size(); ++c) {
      const Eigen::MatrixXd projected = pca.ProjectRows(raw[t][c]);
      std::vector<QuerySpec> specs =
          precompute_clip(entry.clips[c].clip_id, entry.clips[c].available, projected,
                          cfg.precompute);
      if (!specs.empty()) ++summary.clips_with_specs;
      summary.specs += static_cast<int>(specs.size());
      all.insert(all.end(), std::make_move_iterator(specs.begin()),
                 std::make_move_iterator(specs.end()));
    }
    entry.specs = "specs/" + entry.track_id + ".rsq";
    WriteSpecs(m.Resolve(entry.specs), all);
    WriteTextFile(m.Resolve("specs/" + entry.track_id + ".txt"), SpecSummary(all));
  }
  m.Save(manifest_path);
  Emit(log, "precomputed " + std::to_string(summary.specs) + " specs over " +
                std::to_string(summary.clips) + " clips");
  return summary;
}

const ClipView* DatasetView::FindClip(const std::string& clip_id) const {
  const auto it = clip_index.find(clip_id);
  return it == clip_index.end() ? nullptr : &clips[it->second];
}

std::vector<const ClipView*> DatasetView::ClipsIn(Split split) const {
  std::vector<const ClipView*> out;
  for (const ClipView& c : clips) {
    if (c.track->split == split) out.push_back(&c);
  }
  return out;
}

DatasetView LoadDatasetView(const fs::path& manifest_path) {
  if (!fs::exists(manifest_path)) {
    throw ArtifactError("no manifest at " + manifest_path.string() +
                        "; run `regionsep_cli gen-data --out <dir>` first");
  }
  DatasetView view;
  view.manifest = Manifest::Load(manifest_path);
  const Manifest& m = view.manifest;
  if (m.pca.empty() || !fs::exists(m.Resolve(m.pca))) {
    throw ArtifactError("dataset has no PCA" + Hint(manifest_path, "precompute"));
  }
  view.pca = LoadPca(m.Resolve(m.pca));
  for (const ManifestTrack& track : m.tracks) {
    if (track.embeddings.empty() || track.specs.empty() ||
        !fs::exists(m.Resolve(track.embeddings)) || !fs::exists(m.Resolve(track.specs))) {
      throw ArtifactError("track " + track.track_id + " has no embeddings or specs" +
                          Hint(manifest_path, "precompute"));
    }
    const EmbeddingSet set = import_embeddings(m.Resolve(track.embeddings));
    std::map<std::string, Eigen::Index> rows;
    for (size_t i = 0; i < set.source_ids.size(); ++i) {
      rows[set.source_ids[i]] = static_cast<Eigen::Index>(i);
    }
    std::map<std::string, std::vector<QuerySpec>> specs;
    for (QuerySpec& s : ReadSpecs(m.Resolve(track.specs))) {
      specs[s.clip_id].push_back(std::move(s));
    }
    for (const ManifestClip& clip : track.clips) {
      ClipView v;
      v.clip_id = clip.clip_id;
      v.track = &track;
      v.clip = &clip;
      v.raw_embeddings.resize(static_cast<Eigen::Index>(track.stems.size()), set.space_dim());
      for (size_t s = 0; s < track.stems.size(); ++s) {
        const auto it = rows.find(clip.clip_id + "/" + track.stems[s].stem_id);
        if (it == rows.end()) {
          throw ArtifactError("missing embedding for " + clip.clip_id + "/" +
                              track.stems[s].stem_id + Hint(manifest_path, "precompute"));
        }
        v.raw_embeddings.row(static_cast<Eigen::Index>(s)) = set.vectors.row(it->second);
      }
      v.embeddings = view.pca.ProjectRows(v.raw_embeddings);
      if (auto it = specs.find(clip.clip_id); it != specs.end()) v.specs = std::move(it->second);
      view.clip_index[v.clip_id] = view.clips.size();
      view.clips.push_back(std::move(v));
    }
  }
  return view;
}

std::vector<SampleMatrix> LoadClipStems(const DatasetView& view, const ClipView& clip) {
  const StemTrack track = LoadTrack(view.manifest, *clip.track);
  std::vector<SampleMatrix> out;
  for (const SampleMatrix& s : track.stems) {
    out.push_back(s.middleCols(clip.clip->start, clip.clip->length));
  }
  return out;
}

TrainingSet BuildTrainingSet(const DatasetView& view, Split split) {
  TrainingSet data;
  std::map<const ManifestTrack*, int> loaded;
  for (const ClipView* clip : view.ClipsIn(split)) {
    if (clip->specs.empty()) continue;
    auto it = loaded.find(clip->track);
    if (it == loaded.end()) {
      data.tracks.push_back(LoadTrack(view.manifest, *clip->track).stems);
      it = loaded.emplace(clip->track, static_cast<int>(data.tracks.size()) - 1).first;
    }
    data.clips.push_back({it->second, clip->clip->start, clip->clip->length, clip->specs});
  }
  return data;
}

TrainOutput train_on_dataset(const PipelineConfig& cfg, const fs::path& manifest_path,
                             const fs::path& out_dir, const Log& log) {
  const DatasetView view = LoadDatasetView(manifest_path);
  if (view.pca.output_dim() != cfg.model.embed_dim) {
    throw ArtifactError("PCA dimension " + std::to_string(view.pca.output_dim()) +
                        " does not match the model (" + std::to_string(cfg.model.embed_dim) +
                        ")" + Hint(manifest_path, "precompute"));
  }
  const TrainingSet data = BuildTrainingSet(view, Split::kTrain);
  if (data.clips.empty()) throw ArtifactError("no training clips with query specs");
  const TrainingSet val = BuildTrainingSet(view, Split::kValidation);
  Emit(log, "training on " + std::to_string(data.clips.size()) + " clips, " +
                std::to_string(data.num_specs()) + " specs");

  SeparatorModel model = SeparatorModel::Initialize(cfg.model, cfg.seed);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const int every = std::max(1, tc.batches_per_epoch / 8);
  const TrainProgress progress = [&](const StepRecord& r) {
    if (r.step % every != 0) return;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch %d step %lld J %.4f snr %.2f dB lr %.2e", r.epoch,
                  static_cast<long long>(r.step), r.total, r.snr_db, r.lr);
    Emit(log, buf);
  };
  TrainOutput out;
  out.history = train(&model, data, cfg.loss, tc, val.clips.empty() ? nullptr : &val,
                      log ? progress : TrainProgress());
  fs::create_directories(out_dir);
  out.model = out_dir / kModelFile;
  out.loss_trace = out_dir / kLossTraceFile;
  SaveModel(out.model, model, ConfigToJson(cfg));
  WriteLossTrace(out.loss_trace, out.history);
  for (const EpochRecord& e : out.history.epochs) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch %d mean J %.4f val median snr %.2f dB", e.epoch,
                  e.mean_total, e.val_median_snr);
    Emit(log, buf);
  }
  return out;
}

std::string EvalModeName(EvalMode m) {
  return m == EvalMode::kSingleSource ? "single-source" : "multi-source";
}

EvalMode ParseEvalMode(const std::string& name) {
  if (name == "single-source") return EvalMode::kSingleSource;
  if (name == "multi-source") return EvalMode::kMultiSource;
  throw std::invalid_argument("unknown evaluation mode '" + name +
                              "' (expected single-source or multi-source)");
}

namespace {

std::vector<int> SelectQueries(const std::vector<QuerySpec>& specs, EvalMode mode, int max) {
  std::vector<int> eligible;
  for (size_t i = 0; i < specs.size(); ++i) {
    if (mode == EvalMode::kMultiSource || specs[i].targets.size() == 1) {
      eligible.push_back(static_cast<int>(i));
    }
  }
  if (max <= 0 || static_cast<int>(eligible.size()) <= max) return eligible;
  std::vector<int> out;
  for (int k = 0; k < max; ++k) {
    out.push_back(eligible[static_cast<size_t>(k) * eligible.size() / static_cast<size_t>(max)]);
  }
  return out;
}

QueryRecord ScoreQuery(const ClipView& clip, const QuerySpec& spec,
                       const std::vector<SampleMatrix>& stems, const Eigen::MatrixXd& gram,
                       const SampleMatrix& est, const SampleMatrix& target, double ridge) {
  std::vector<int> order = spec.targets;
  order.insert(order.end(), spec.non_targets.begin(), spec.non_targets.end());
  const auto n = static_cast<Eigen::Index>(order.size());
  Eigen::MatrixXd g(n, n);
  Eigen::VectorXd corr(n);
  const auto e = Flat(est);
  for (Eigen::Index i = 0; i < n; ++i) {
    corr[i] = Flat(stems[order[i]]).dot(e);
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = gram(order[i], order[j]);
  }
  const SourceWeights w =
      fit_source_weights_gram(g, corr, static_cast<int>(spec.targets.size()), ridge);
  const RetrievalScores scores = normalize_scores(w, clip.clip_id);

  QueryRecord r;
  r.clip_id = clip.clip_id;
  r.mixture_count = static_cast<int>(n);
  r.target_count = static_cast<int>(spec.targets.size());
  r.snr_db = snr(est, target);
  r.degenerate = w.degenerate;
  for (size_t i = 0; i < spec.targets.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    r.stems.push_back({clip.track->stems[spec.targets[i]].label, true, scores.phi_hat[k],
                       w.targets[k]});
  }
  for (size_t i = 0; i < spec.non_targets.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    r.stems.push_back({clip.track->stems[spec.non_targets[i]].label, false,
                       scores.phi_hat_perp[k], w.non_targets[k]});
  }
  return r;
}

}  // namespace

std::vector<QueryRecord> evaluate_dataset(const PipelineConfig& cfg, const DatasetView& view,
                                          const EvalOptions& options, const Log& log) {
  cfg.eval.Validate();
  std::unique_ptr<SeparatorModel> model;
  if (!options.oracle) {
    if (!fs::exists(options.model)) {
      throw ArtifactError("no model at " + options.model.string() +
                          "; run `regionsep_cli train` first or pass --oracle");
    }
    model = std::make_unique<SeparatorModel>(LoadModel(options.model));
    if (model->dims().embed_dim != view.pca.output_dim()) {
      throw ArtifactError("model query dimension does not match the dataset PCA");
    }
  }
  std::unique_ptr<Stft> stft;
  if (model) stft = std::make_unique<Stft>(model->dims().stft);

  std::vector<QueryRecord> records;
  const ManifestTrack* current = nullptr;
  StemTrack track;
  for (const ClipView* clip : view.ClipsIn(options.split)) {
    if (clip->specs.empty()) continue;
    const auto position = clip->clip - clip->track->clips.data();
    if (position % cfg.eval.clip_stride != 0) continue;
    const std::vector<int> queries =
        SelectQueries(clip->specs, options.mode, cfg.eval.max_queries_per_clip);
    if (queries.empty()) continue;
    if (current != clip->track) {
      track = LoadTrack(view.manifest, *clip->track);
      current = clip->track;
      Emit(log, "evaluating " + current->track_id);
    }
    std::vector<SampleMatrix> stems;
    for (const SampleMatrix& s : track.stems) {
      stems.push_back(s.middleCols(clip->clip->start, clip->clip->length));
    }
    const auto n = static_cast<Eigen::Index>(stems.size());
    Eigen::MatrixXd gram(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i; j < n; ++j) {
        gram(i, j) = gram(j, i) = Flat(stems[i]).dot(Flat(stems[j]));
      }
    }

    for (int qi : queries) {
      const QuerySpec& spec = clip->specs[qi];
      const std::vector<int> mixture = spec.MixtureIndices();
      std::vector<const SampleMatrix*> mix_stems, target_stems;
      Eigen::MatrixXd mix_embed(static_cast<Eigen::Index>(mixture.size()), clip->embeddings.cols());
      for (size_t i = 0; i < mixture.size(); ++i) {
        mix_stems.push_back(&stems[mixture[i]]);
        mix_embed.row(static_cast<Eigen::Index>(i)) = clip->embeddings.row(mixture[i]);
      }
      for (int t : spec.targets) target_stems.push_back(&stems[t]);
      const SampleMatrix target = mix(target_stems, stems[0].rows(), stems[0].cols());
      const SampleMatrix mixture_audio =
          model ? mix(mix_stems, stems[0].rows(), stems[0].cols()) : SampleMatrix();

      std::vector<double> alphas = {0.0};
      if (options.mode == EvalMode::kSingleSource) alphas = cfg.eval.alpha_grid;
      for (double alpha : alphas) {
        const Ellipsoid query = options.mode == EvalMode::kSingleSource
                                    ? single_source_query(spec, alpha)
                                    : spec.At(cfg.eval.t);
        const SampleMatrix est = model ? separate(mixture_audio, query, *model, *stft)
                                       : oracle_separate(mix_stems, mix_embed, query);
        QueryRecord r = ScoreQuery(*clip, spec, stems, gram, est, target, cfg.eval.ridge);
        r.query_id = qi;
        r.mode = EvalModeName(options.mode);
        r.alpha = alpha;
        records.push_back(std::move(r));
      }
    }
  }
  if (records.empty()) {
    throw ArtifactError("no evaluable queries in the " + SplitName(options.split) + " split");
  }
  return records;
}

std::vector<QueryRecord> BestAlphaRecords(const std::vector<QueryRecord>& records) {
  std::vector<QueryRecord> out;
  std::map<std::pair<std::string, int>, size_t> best;
  for (const QueryRecord& r : records) {
    const auto key = std::make_pair(r.clip_id, r.query_id);
    const auto it = best.find(key);
    if (it == best.end()) {
      best[key] = out.size();
      out.push_back(r);
    } else if (r.snr_db > out[it->second].snr_db) {
      out[it->second] = r;
    }
  }
  return out;
}

namespace {

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string Opt(const std::optional<double>& v) { return v ? Num(*v) : ""; }

}  // namespace

std::map<std::string, std::string> RenderReports(const std::vector<QueryRecord>& records,
                                                 double threshold) {
  if (records.empty()) throw std::invalid_argument("no records to report");
  const std::string mode = records.front().mode;
  for (const QueryRecord& r : records) {
    if (r.mode != mode) throw std::invalid_argument("records mix evaluation modes");
  }
  std::map<std::string, std::string> files;
  const bool single = mode == EvalModeName(EvalMode::kSingleSource);
  const std::vector<QueryRecord> scored = single ? BestAlphaRecords(records) : records;
  const MetricsReport report = compute_metrics(scored, threshold);
  files["metrics.csv"] = MetricsTableCsv(report);
  files["cells.csv"] = CellsCsv(report.cells);
  files["cells_snr.csv"] = CellMatrixCsv(report.cells, true);
  files["cells_wmap.csv"] = CellMatrixCsv(report.cells, false);

  if (single) {
    // Per-class SNR at the clip-wise best alpha.
    std::string dist = "label,clip_id,query_id,best_alpha,snr_db\n";
    std::map<std::string, std::vector<double>> by_class;
    for (const QueryRecord& r : scored) {
      std::string label;
      for (const ScoredStem& s : r.stems) {
        if (s.is_target) label = s.label;
      }
      dist += label + "," + r.clip_id + "," + std::to_string(r.query_id) + "," + Num(r.alpha) +
              "," + Num(r.snr_db) + "\n";
      by_class[label].push_back(r.snr_db);
    }
    files["snr_by_class.csv"] = dist;
    std::string summary = "label,count,median_snr_db\n";
    for (const auto& [label, v] : by_class) {
      summary += label + "," + std::to_string(v.size()) + "," + Num(median(v)) + "\n";
    }
    files["snr_class_summary.csv"] = summary;

    std::map<double, std::pair<std::vector<double>, std::vector<int>>> by_alpha;
    for (const QueryRecord& r : records) {
      auto& [scores, truth] = by_alpha[r.alpha];
      for (const ScoredStem& s : r.stems) {
        scores.push_back(s.score);
        truth.push_back(s.is_target ? 1 : 0);
      }
    }
    std::string roc = "alpha,threshold,fpr,tpr\n";
    std::string auc = "alpha,queries,rocauc,ap\n";
    for (const auto& [alpha, st] : by_alpha) {
      for (const RocPoint& p : roc_curve(st.first, st.second)) {
        roc += Num(alpha) + "," + Num(p.threshold) + "," + Num(p.fpr) + "," + Num(p.tpr) + "\n";
      }
      size_t queries = 0;
      for (const QueryRecord& r : records) queries += r.alpha == alpha;
      auc += Num(alpha) + "," + std::to_string(queries) + "," +
             Opt(roc_auc(st.first, st.second)) + "," +
             Opt(average_precision(st.first, st.second)) + "\n";
    }
    files["roc.csv"] = roc;
    files["roc_auc.csv"] = auc;
  }
  return files;
}

void WriteEvaluation(const std::vector<QueryRecord>& records, double threshold,
                     const fs::path& out_dir) {
  fs::create_directories(out_dir);
  WriteTextFile(out_dir / kRecordsFile, EncodeQueryRecords(records));
  for (const auto& [name, text] : RenderReports(records, threshold)) {
    WriteTextFile(out_dir / name, text);
  }
}

std::map<std::string, std::string> RegenerateReports(const fs::path& out_dir, double threshold) {
  const fs::path path = out_dir / kRecordsFile;
  if (!fs::exists(path)) {
    throw ArtifactError("no records at " + path.string() +
                        "; run `regionsep_cli evaluate --out " + out_dir.string() + "` first");
  }
  const auto files = RenderReports(DecodeQueryRecords(ReadTextFile(path)), threshold);
  for (const auto& [name, text] : files) WriteTextFile(out_dir / name, text);
  return files;
}

std::vector<std::string> oracle_separate_clip(const DatasetView& view, const std::string& clip_id,
                                              int query_id, double t, const fs::path& out_dir) {
  const ClipView* clip = view.FindClip(clip_id);
  if (clip == nullptr) throw ArtifactError("unknown clip " + clip_id);
  if (query_id < 0 || query_id >= static_cast<int>(clip->specs.size())) {
    throw ArtifactError("clip " + clip_id + " has no query " + std::to_string(query_id) + " (" +
                        std::to_string(clip->specs.size()) + " specs)");
  }
  const QuerySpec& spec = clip->specs[query_id];
  const std::vector<SampleMatrix> stems = LoadClipStems(view, *clip);
  const std::vector<int> mixture = spec.MixtureIndices();
  std::vector<const SampleMatrix*> mix_stems, target_stems;
  Eigen::MatrixXd embed(static_cast<Eigen::Index>(mixture.size()), clip->embeddings.cols());
  for (size_t i = 0; i < mixture.size(); ++i) {
    mix_stems.push_back(&stems[mixture[i]]);
    embed.row(static_cast<Eigen::Index>(i)) = clip->embeddings.row(mixture[i]);
  }
  for (int i : spec.targets) target_stems.push_back(&stems[i]);
  std::vector<int> members;
  const SampleMatrix est = oracle_separate(mix_stems, embed, spec.At(t), &members);
  const int rate = clip->track->sample_rate;
  fs::create_directories(out_dir);
  WriteWav(out_dir / "mixture.wav",
           AudioChunk(mix(mix_stems, stems[0].rows(), stems[0].cols()), rate));
  WriteWav(out_dir / "target.wav",
           AudioChunk(mix(target_stems, stems[0].rows(), stems[0].cols()), rate));
  WriteWav(out_dir / "extraction.wav", AudioChunk(est, rate));
  std::vector<std::string> ids;
  for (int m : members) ids.push_back(clip->track->stems[mixture[m]].stem_id);
  return ids;
}

}  // namespace regionsep
