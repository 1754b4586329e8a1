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

#include "regionsep/cli.h"

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "regionsep/config.h"
#include "regionsep/pipeline.h"
#include "regionsep/service.h"

namespace regionsep {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<uint64_t> seed;
  std::string manifest;
  std::string out;
  std::string alpha_grid;
  std::optional<double> threshold;
  bool quiet = false;
};

void AddCommon(CLI::App* cmd, Common* c, bool manifest) {
  cmd->add_option("--config", c->config, "JSON configuration file");
  cmd->add_option("--seed", c->seed, "Seed for every random stream");
  if (manifest) {
    cmd->add_option("--manifest", c->manifest, "Dataset manifest or its directory")
        ->required();
  }
  cmd->add_option("--out", c->out, "Output directory");
  cmd->add_option("--alpha-grid", c->alpha_grid, "Comma-separated alpha values");
  cmd->add_option("--threshold", c->threshold, "Decision threshold for retrieval metrics");
  cmd->add_flag("--quiet", c->quiet, "Suppress progress output");
}

std::vector<double> ParseGrid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw std::invalid_argument("--alpha-grid: cannot parse '" + item + "'");
    }
    grid.push_back(v);
  }
  if (grid.empty()) throw std::invalid_argument("--alpha-grid: empty list");
  return grid;
}

PipelineConfig Resolve(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? ParseConfig("{}") : LoadConfig(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.train.seed = cfg.seed;
  if (!c.alpha_grid.empty()) cfg.eval.alpha_grid = ParseGrid(c.alpha_grid);
  if (c.threshold) cfg.eval.threshold = *c.threshold;
  cfg.Validate();
  return cfg;
}

fs::path ManifestPath(const std::string& arg) {
  const fs::path p(arg);
  return fs::is_directory(p) ? p / kManifestName : p;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Query-by-region source separation toolkit"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("gen-data", "Generate or ingest a multi-stem dataset");
  AddCommon(gen, &common, false);
  std::string ingest;
  gen->add_option("--ingest", ingest, "Folder of track folders to ingest instead");

  auto* pre = app.add_subcommand("precompute", "Embed clips, fit the PCA, build query specs");
  AddCommon(pre, &common, true);

  auto* tr = app.add_subcommand("train", "Train the separator on the training split");
  AddCommon(tr, &common, true);

  auto* ev = app.add_subcommand("evaluate", "Score separations on a split");
  AddCommon(ev, &common, true);
  std::string mode = "multi-source";
  std::string model_path;
  std::string split = "test";
  bool oracle = false;
  std::optional<int> max_queries, clip_stride;
  std::optional<double> t;
  ev->add_option("--mode", mode, "single-source or multi-source")
      ->check(CLI::IsMember({"single-source", "multi-source"}));
  auto* oracle_flag = ev->add_flag("--oracle", oracle, "Use the oracle separator");
  ev->add_option("--model", model_path, "Trained model checkpoint")->excludes(oracle_flag);
  ev->add_option("--split", split, "train, validation or test");
  ev->add_option("--max-queries-per-clip", max_queries, "Evenly spaced subset (0 = all)");
  ev->add_option("--clip-stride", clip_stride, "Evaluate every k-th clip of a track");
  ev->add_option("--t", t, "Interpolation of multi-source queries");

  auto* os = app.add_subcommand("oracle-separate", "Render the oracle extraction of one query");
  AddCommon(os, &common, true);
  std::string clip_id;
  int query_id = 0;
  double os_t = 0.5;
  os->add_option("--clip", clip_id, "Clip id")->required();
  os->add_option("--query", query_id, "Query index within the clip");
  os->add_option("--t", os_t, "Interpolation between inclusion and exclusion radii");

  auto* rep = app.add_subcommand("report", "Regenerate CSV reports from stored records");
  AddCommon(rep, &common, false);

  auto* serve = app.add_subcommand("serve", "HTTP service for the query studio");
  AddCommon(serve, &common, true);
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string serve_model;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--model", serve_model, "Model checkpoint to load at start");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  const Log log = [&](const std::string& msg) {
    if (!common.quiet) out << msg << std::endl;
  };
  try {
    const PipelineConfig cfg = Resolve(common);
    if (gen->parsed()) {
      if (common.out.empty()) throw std::invalid_argument("gen-data needs --out <dir>");
      const Manifest m = ingest.empty() ? generate_dataset(cfg, common.out, log)
                                        : ingest_dataset(cfg, ingest, common.out, log);
      out << "manifest: " << (fs::path(common.out) / kManifestName).string() << "\n";
      for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
        out << SplitName(s) << ": " << m.TracksIn(s).size() << " tracks\n";
      }
    } else if (pre->parsed()) {
      const PrecomputeSummary s = precompute_dataset(cfg, ManifestPath(common.manifest), log);
      out << "clips: " << s.clips << " (" << s.clips_with_specs << " with specs)\n"
          << "specs: " << s.specs << "\n"
          << "pca explained variance: " << s.explained_variance << "\n";
    } else if (tr->parsed()) {
      const fs::path manifest = ManifestPath(common.manifest);
      const fs::path dir = common.out.empty() ? manifest.parent_path() / "run" : fs::path(common.out);
      const TrainOutput r = train_on_dataset(cfg, manifest, dir, log);
      out << "model: " << r.model.string() << "\nloss trace: " << r.loss_trace.string() << "\n";
    } else if (ev->parsed()) {
      PipelineConfig ecfg = cfg;
      if (max_queries) ecfg.eval.max_queries_per_clip = *max_queries;
      if (clip_stride) ecfg.eval.clip_stride = *clip_stride;
      if (t) ecfg.eval.t = *t;
      ecfg.eval.Validate();
      const fs::path manifest = ManifestPath(common.manifest);
      EvalOptions opt;
      opt.mode = ParseEvalMode(mode);
      opt.split = ParseSplit(split);
      opt.oracle = oracle || model_path.empty();
      opt.model = model_path;
      if (!oracle && model_path.empty()) log("no --model given; using the oracle separator");
      const DatasetView view = LoadDatasetView(manifest);
      const auto records = evaluate_dataset(ecfg, view, opt, log);
      const fs::path dir = common.out.empty() ? manifest.parent_path() / ("eval-" + mode)
                                              : fs::path(common.out);
      WriteEvaluation(records, ecfg.eval.threshold, dir);
      const auto scored = opt.mode == EvalMode::kSingleSource ? BestAlphaRecords(records) : records;
      const MetricsReport report = compute_metrics(scored, ecfg.eval.threshold);
      out << "queries: " << records.size() << "\n";
      out << "precision: " << report.micro.precision << " recall: " << report.micro.recall << "\n";
      if (report.macro.map) out << "mAP: " << *report.macro.map << "\n";
      if (report.weighted.map) out << "weighted mAP: " << *report.weighted.map << "\n";
      if (report.median_snr) out << "median SNR: " << *report.median_snr << " dB\n";
      out << "reports: " << dir.string() << "\n";
    } else if (os->parsed()) {
      const fs::path manifest = ManifestPath(common.manifest);
      const DatasetView view = LoadDatasetView(manifest);
      const fs::path dir = common.out.empty() ? fs::path("oracle-" + clip_id) : fs::path(common.out);
      const auto members = oracle_separate_clip(view, clip_id, query_id, os_t, dir);
      out << "members:";
      for (const auto& m : members) out << " " << m;
      out << "\nwrote " << dir.string() << "\n";
    } else if (rep->parsed()) {
      if (common.out.empty()) throw std::invalid_argument("report needs --out <evaluation dir>");
      for (const auto& [name, text] : RegenerateReports(common.out, cfg.eval.threshold)) {
        out << "wrote " << (fs::path(common.out) / name).string() << "\n";
      }
    } else if (serve->parsed()) {
      auto service = Service::Load(ManifestPath(common.manifest), serve_model);
      log("serving on http://" + host + ":" + std::to_string(port));
      service->Listen(host, port);
    }
  } catch (const ArtifactError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace regionsep
