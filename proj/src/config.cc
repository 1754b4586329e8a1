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

#include "regionsep/config.h"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace regionsep {

void EvalConfig::Validate() const {
  if (!(threshold >= 0 && threshold <= 1)) throw std::invalid_argument("eval: threshold must lie in [0, 1]");
  if (!(ridge >= 0)) throw std::invalid_argument("eval: ridge must be >= 0");
  if (alpha_grid.empty()) throw std::invalid_argument("eval: empty alpha grid");
  for (double a : alpha_grid) {
    if (!(a >= 1e-3 && a <= 1)) throw std::invalid_argument("eval: alpha values must lie in [1e-3, 1]");
  }
  if (max_queries_per_clip < 0 || clip_stride < 1) {
    throw std::invalid_argument("eval: invalid query or clip subsampling");
  }
  if (!(t >= 0 && t <= 1)) throw std::invalid_argument("eval: t must lie in [0, 1]");
}

void PipelineConfig::Validate() const {
  data.Validate();
  splits.Validate();
  stft.Validate();
  precompute.Validate();
  model.Validate();
  loss.Validate();
  train.Validate();
  eval.Validate();
  if (!(window_seconds > 0 && stride_seconds > 0)) {
    throw std::invalid_argument("chunking: window and stride must be > 0");
  }
  if (model.embed_dim != pca_dim) {
    throw std::invalid_argument("config: model embed_dim must equal pca_dim");
  }
  if (pca_dim < 1 || pca_dim > embedding.dim) {
    throw std::invalid_argument("config: pca_dim must lie in [1, embedding dim]");
  }
  if (model.channels != data.channels) {
    throw std::invalid_argument("config: model channels must match data channels");
  }
}

namespace {

using nlohmann::json;

// Reads known keys and reports the first unknown one.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw std::invalid_argument("config: '" + name_ + "' must be an object");
  }
  template <typename T>
  void Get(const char* key, T* out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      *out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: " + name_ + "." + key + ": " + e.what());
    }
  }
  void Mark(const char* key) { seen_.insert(key); }
  void Finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw std::invalid_argument("config: unknown key " + name_ + "." + key);
      }
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

PipelineConfig ParseConfig(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
  PipelineConfig cfg;
  Section top(root, "config");
  top.Get("seed", &cfg.seed);
  const json empty = json::object();
  auto sub = [&](const char* name) -> const json& {
    top.Mark(name);
    return root.contains(name) ? root.at(name) : empty;
  };

  {
    Section s(sub("data"), "data");
    s.Get("num_tracks", &cfg.data.num_tracks);
    s.Get("track_seconds", &cfg.data.track_seconds);
    s.Get("min_stems", &cfg.data.min_stems);
    s.Get("max_stems", &cfg.data.max_stems);
    s.Get("sample_rate", &cfg.data.sample_rate);
    s.Get("channels", &cfg.data.channels);
    s.Get("archetypes", &cfg.data.archetypes);
    s.Get("silence_probability", &cfg.data.silence_probability);
    s.Get("min_level_db", &cfg.data.min_level_db);
    s.Get("max_level_db", &cfg.data.max_level_db);
    s.Finish();
  }
  {
    Section s(sub("chunking"), "chunking");
    s.Get("window_seconds", &cfg.window_seconds);
    s.Get("stride_seconds", &cfg.stride_seconds);
    s.Finish();
  }
  {
    Section s(sub("splits"), "splits");
    s.Get("train", &cfg.splits.train);
    s.Get("validation", &cfg.splits.validation);
    s.Get("test", &cfg.splits.test);
    s.Finish();
  }
  {
    Section s(sub("stft"), "stft");
    s.Get("fft_size", &cfg.stft.fft_size);
    s.Get("hop", &cfg.stft.hop);
    std::string window = WindowName(cfg.stft.window);
    s.Get("window", &window);
    cfg.stft.window = ParseWindow(window);
    s.Finish();
  }
  {
    Section s(sub("embedding"), "embedding");
    s.Get("dim", &cfg.embedding.dim);
    s.Get("min_seconds", &cfg.embedding.min_seconds);
    s.Get("pca_dim", &cfg.pca_dim);
    s.Finish();
  }
  {
    Section s(sub("precompute"), "precompute");
    s.Get("level_gate_db", &cfg.precompute.level_gate_db);
    s.Get("delta", &cfg.precompute.delta);
    s.Get("eps", &cfg.precompute.eps);
    s.Get("max_subset_card", &cfg.precompute.max_subset_card);
    s.Get("max_specs_per_clip", &cfg.precompute.max_specs_per_clip);
    s.Get("no_nontarget_ratio", &cfg.precompute.no_nontarget_ratio);
    s.Get("catch_margin", &cfg.precompute.catch_margin);
    s.Finish();
  }
  {
    Section s(sub("model"), "model");
    s.Get("bands", &cfg.model.bands);
    s.Get("film_hidden", &cfg.model.film_hidden);
    s.Get("dec_hidden", &cfg.model.dec_hidden);
    s.Get("mask_bound", &cfg.model.mask_bound);
    s.Finish();
  }
  {
    Section s(sub("loss"), "loss");
    s.Get("eps", &cfg.loss.eps_l1snr);
    s.Get("lambda0", &cfg.loss.lambda0);
    s.Get("delta_lambda", &cfg.loss.delta_lambda);
    s.Get("l_min", &cfg.loss.l_min);
    s.Finish();
  }
  {
    Section s(sub("train"), "train");
    s.Get("lr", &cfg.train.lr);
    s.Get("lr_decay_per_epoch", &cfg.train.lr_decay_per_epoch);
    s.Get("batch_size", &cfg.train.batch_size);
    s.Get("batches_per_epoch", &cfg.train.batches_per_epoch);
    s.Get("epochs", &cfg.train.epochs);
    s.Get("weight_decay", &cfg.train.weight_decay);
    s.Get("beta1", &cfg.train.beta1);
    s.Get("beta2", &cfg.train.beta2);
    s.Get("adam_eps", &cfg.train.adam_eps);
    s.Get("augment", &cfg.train.augment);
    s.Get("gain_db_range", &cfg.train.gain_db_range);
    s.Get("swap_probability", &cfg.train.swap_probability);
    s.Get("fixed_query", &cfg.train.fixed_query);
    s.Get("val_queries", &cfg.train.val_queries);
    s.Finish();
  }
  {
    Section s(sub("eval"), "eval");
    s.Get("threshold", &cfg.eval.threshold);
    s.Get("ridge", &cfg.eval.ridge);
    s.Get("alpha_grid", &cfg.eval.alpha_grid);
    s.Get("max_queries_per_clip", &cfg.eval.max_queries_per_clip);
    s.Get("clip_stride", &cfg.eval.clip_stride);
    s.Get("t", &cfg.eval.t);
    s.Finish();
  }
  top.Finish();

  // Shared settings flow into the sections that use them.
  cfg.embedding.stft = cfg.stft;
  cfg.model.stft = cfg.stft;
  cfg.model.embed_dim = cfg.pca_dim;
  cfg.model.channels = cfg.data.channels;
  cfg.train.chunk_seconds = cfg.window_seconds;
  cfg.train.seed = cfg.seed;
  cfg.Validate();
  return cfg;
}

PipelineConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return ParseConfig(ss.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string ConfigToJson(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["data"] = {{"num_tracks", c.data.num_tracks},
               {"track_seconds", c.data.track_seconds},
               {"min_stems", c.data.min_stems},
               {"max_stems", c.data.max_stems},
               {"sample_rate", c.data.sample_rate},
               {"channels", c.data.channels},
               {"archetypes", c.data.archetypes},
               {"silence_probability", c.data.silence_probability},
               {"min_level_db", c.data.min_level_db},
               {"max_level_db", c.data.max_level_db}};
  j["chunking"] = {{"window_seconds", c.window_seconds}, {"stride_seconds", c.stride_seconds}};
  j["splits"] = {{"train", c.splits.train},
                 {"validation", c.splits.validation},
                 {"test", c.splits.test}};
  j["stft"] = {{"fft_size", c.stft.fft_size},
               {"hop", c.stft.hop},
               {"window", WindowName(c.stft.window)}};
  j["embedding"] = {{"dim", c.embedding.dim},
                    {"min_seconds", c.embedding.min_seconds},
                    {"pca_dim", c.pca_dim}};
  j["precompute"] = {{"level_gate_db", c.precompute.level_gate_db},
                     {"delta", c.precompute.delta},
                     {"eps", c.precompute.eps},
                     {"max_subset_card", c.precompute.max_subset_card},
                     {"max_specs_per_clip", c.precompute.max_specs_per_clip},
                     {"no_nontarget_ratio", c.precompute.no_nontarget_ratio},
                     {"catch_margin", c.precompute.catch_margin}};
  j["model"] = {{"bands", c.model.bands},
                {"film_hidden", c.model.film_hidden},
                {"dec_hidden", c.model.dec_hidden},
                {"mask_bound", c.model.mask_bound}};
  j["loss"] = {{"eps", c.loss.eps_l1snr},
               {"lambda0", c.loss.lambda0},
               {"delta_lambda", c.loss.delta_lambda},
               {"l_min", c.loss.l_min}};
  j["train"] = {{"lr", c.train.lr},
                {"lr_decay_per_epoch", c.train.lr_decay_per_epoch},
                {"batch_size", c.train.batch_size},
                {"batches_per_epoch", c.train.batches_per_epoch},
                {"epochs", c.train.epochs},
                {"weight_decay", c.train.weight_decay},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"adam_eps", c.train.adam_eps},
                {"augment", c.train.augment},
                {"gain_db_range", c.train.gain_db_range},
                {"swap_probability", c.train.swap_probability},
                {"fixed_query", c.train.fixed_query},
                {"val_queries", c.train.val_queries}};
  j["eval"] = {{"threshold", c.eval.threshold},
               {"ridge", c.eval.ridge},
               {"alpha_grid", c.eval.alpha_grid},
               {"max_queries_per_clip", c.eval.max_queries_per_clip},
               {"clip_stride", c.eval.clip_stride},
               {"t", c.eval.t}};
  return j.dump(2) + "\n";
}

}  // namespace regionsep
