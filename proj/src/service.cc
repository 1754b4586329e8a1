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

#include "regionsep/service.h"

#include <cstdio>
#include <stdexcept>

#include "httplib.h"
#include "json.hpp"
#include "regionsep/retrieval.h"
#include "regionsep/wav.h"

namespace regionsep {

using nlohmann::json;

namespace {

HttpResponse Error(int status, const std::string& code, const std::string& message) {
  json j = {{"error", {{"code", code}, {"message", message}}}};
  return {status, j.dump(), "application/json"};
}

HttpResponse Ok(const json& j) { return {200, j.dump(), "application/json"}; }

json Vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::vector<std::string> StemIds(const ClipView& clip, const std::vector<int>& idx) {
  std::vector<std::string> out;
  for (int i : idx) out.push_back(clip.track->stems[i].stem_id);
  return out;
}

// Thrown for malformed requests; mapped to 400.
struct BadRequest : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace

Service::Service(DatasetView view) : view_(std::move(view)) {}

Service::~Service() { Stop(); }

std::unique_ptr<Service> Service::Load(const std::filesystem::path& manifest,
                                       const std::filesystem::path& model) {
  auto service = std::make_unique<Service>(LoadDatasetView(manifest));
  if (!model.empty()) {
    service->SetModel(std::make_shared<const SeparatorModel>(LoadModel(model)));
  }
  return service;
}

void Service::SetModel(std::shared_ptr<const SeparatorModel> model) {
  if (model && model->dims().embed_dim != view_.pca.output_dim()) {
    throw std::invalid_argument("model query dimension does not match the dataset PCA");
  }
  std::lock_guard<std::mutex> lock(model_mu_);
  model_ = std::move(model);
  ++model_version_;
}

std::pair<std::shared_ptr<const SeparatorModel>, int64_t> Service::CurrentModel() const {
  std::lock_guard<std::mutex> lock(model_mu_);
  return {model_, model_version_};
}

std::vector<SampleMatrix> Service::ClipStems(const ClipView& clip) const {
  std::shared_ptr<const StemTrack> track;
  {
    std::lock_guard<std::mutex> lock(track_mu_);
    auto& slot = tracks_[clip.track->track_id];
    if (!slot) slot = std::make_shared<const StemTrack>(LoadTrack(view_.manifest, *clip.track));
    track = slot;
  }
  std::vector<SampleMatrix> out;
  for (const SampleMatrix& s : track->stems) {
    out.push_back(s.middleCols(clip.clip->start, clip.clip->length));
  }
  return out;
}

std::string Service::CacheAudio(const std::string& key, const AudioChunk& audio) {
  char token[24];
  std::snprintf(token, sizeof(token), "%016llx",
                static_cast<unsigned long long>(Fnv1a64(key)));
  std::lock_guard<std::mutex> lock(audio_mu_);
  auto& slot = audio_[token];
  if (!slot) slot = std::make_shared<const std::string>(EncodeWav(audio));
  return token;
}

HttpResponse Service::Clips() const {
  json clips = json::array();
  for (const ClipView& c : view_.clips) {
    const double rate = c.track->sample_rate;
    json stems = json::array();
    for (size_t s = 0; s < c.track->stems.size(); ++s) {
      stems.push_back({{"stem_id", c.track->stems[s].stem_id},
                       {"label", c.track->stems[s].label}});
    }
    clips.push_back({{"clip_id", c.clip_id},
                     {"track_id", c.track->track_id},
                     {"split", SplitName(c.track->split)},
                     {"start_seconds", static_cast<double>(c.clip->start) / rate},
                     {"length_seconds", static_cast<double>(c.clip->length) / rate},
                     {"available", c.clip->available},
                     {"stems", stems},
                     {"num_queries", c.specs.size()}});
  }
  return Ok({{"clips", clips}, {"dim", view_.pca.output_dim()}});
}

HttpResponse Service::Projection(const std::string& clip_id, int i, int j) const {
  const ClipView* c = view_.FindClip(clip_id);
  if (c == nullptr) return Error(404, "unknown_clip", "no clip " + clip_id);
  const auto d = static_cast<int>(c->embeddings.cols());
  if (i < 0 || j < 0 || i >= d || j >= d || i == j) {
    return Error(400, "invalid_axes", "axes must be two distinct indices below " +
                                          std::to_string(d));
  }
  json points = json::array();
  for (Eigen::Index s = 0; s < c->embeddings.rows(); ++s) {
    const bool available = std::find(c->clip->available.begin(), c->clip->available.end(),
                                     static_cast<int>(s)) != c->clip->available.end();
    points.push_back({{"stem_id", c->track->stems[s].stem_id},
                      {"label", c->track->stems[s].label},
                      {"x", c->embeddings(s, i)},
                      {"y", c->embeddings(s, j)},
                      {"embedding", Vec(c->embeddings.row(s).transpose())},
                      {"available", available}});
  }
  return Ok({{"clip_id", clip_id}, {"axes_pair", {i, j}}, {"points", points}});
}

HttpResponse Service::Queries(const std::string& clip_id) const {
  const ClipView* c = view_.FindClip(clip_id);
  if (c == nullptr) return Error(404, "unknown_clip", "no clip " + clip_id);
  json queries = json::array();
  for (size_t q = 0; q < c->specs.size(); ++q) {
    const QuerySpec& s = c->specs[q];
    json axes = json::array();  // columns
    for (Eigen::Index k = 0; k < s.axes.cols(); ++k) axes.push_back(Vec(s.axes.col(k)));
    queries.push_back({{"query_id", q},
                       {"targets", StemIds(*c, s.targets)},
                       {"non_targets", StemIds(*c, s.non_targets)},
                       {"eliminated", StemIds(*c, s.eliminated)},
                       {"center", Vec(s.center)},
                       {"axes", axes},
                       {"inclusion_radii", Vec(s.inclusion_radii)},
                       {"exclusion_radii", Vec(s.exclusion_radii)}});
  }
  return Ok({{"clip_id", clip_id}, {"queries", queries}});
}

HttpResponse Service::Separate(const std::string& body) {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception& e) {
    return Error(400, "malformed_json", e.what());
  }
  try {
    const std::string clip_id = req.at("clip_id").get<std::string>();
    const ClipView* c = view_.FindClip(clip_id);
    if (c == nullptr) return Error(404, "unknown_clip", "no clip " + clip_id);
    const int query_id = req.at("query_id").get<int>();
    if (query_id < 0 || query_id >= static_cast<int>(c->specs.size())) {
      return Error(404, "unknown_query", "clip " + clip_id + " has no query " +
                                             std::to_string(query_id));
    }
    const QuerySpec& spec = c->specs[query_id];
    const auto d = static_cast<int>(spec.dim());
    const std::string mode = req.value("mode", std::string("oracle"));
    if (mode != "oracle" && mode != "model") throw BadRequest("mode must be oracle or model");
    const double t = req.value("t", 0.5);
    if (!(t >= 0 && t <= 1)) throw BadRequest("t must lie in [0, 1]");

    Ellipsoid region = spec.At(t);
    if (req.contains("axes_pair") || req.contains("radii")) {
      const auto pair = req.at("axes_pair").get<std::vector<int>>();
      const auto radii = req.at("radii").get<std::vector<double>>();
      if (pair.size() != 2 || radii.size() != 2) {
        throw BadRequest("axes_pair and radii need two entries each");
      }
      if (pair[0] < 0 || pair[1] < 0 || pair[0] >= d || pair[1] >= d || pair[0] == pair[1]) {
        throw BadRequest("axes_pair must be two distinct indices below " + std::to_string(d));
      }
      for (double r : radii) {
        if (!(r >= 0) || !std::isfinite(r)) throw BadRequest("radii must be finite and >= 0");
      }
      region.radii[pair[0]] = radii[0];
      region.radii[pair[1]] = radii[1];
      if (req.contains("center")) {
        const auto center = req.at("center").get<std::vector<double>>();
        if (static_cast<int>(center.size()) == d) {
          region.center = Eigen::Map<const Eigen::VectorXd>(center.data(), d);
        } else if (center.size() == 2) {
          region.center[pair[0]] = center[0];
          region.center[pair[1]] = center[1];
        } else {
          throw BadRequest("center needs D or 2 entries");
        }
        if (!region.center.allFinite()) throw BadRequest("center must be finite");
      }
    } else if (req.contains("center")) {
      throw BadRequest("center requires axes_pair and radii");
    }

    const auto [model, version] = CurrentModel();
    if (mode == "model" && !model) {
      return Error(409, "no_model", "no model loaded; POST /model or start with --model");
    }

    const std::vector<SampleMatrix> stems = ClipStems(*c);
    const std::vector<int> mixture = spec.MixtureIndices();
    std::vector<const SampleMatrix*> mix_stems;
    Eigen::MatrixXd embed(static_cast<Eigen::Index>(mixture.size()), d);
    for (size_t i = 0; i < mixture.size(); ++i) {
      mix_stems.push_back(&stems[mixture[i]]);
      embed.row(static_cast<Eigen::Index>(i)) = c->embeddings.row(mixture[i]);
    }
    std::vector<int> members;
    const SampleMatrix reference = oracle_separate(mix_stems, embed, region, &members);
    SampleMatrix est;
    if (mode == "oracle") {
      est = reference;
    } else {
      const Stft stft(model->dims().stft);
      est = separate(mix(mix_stems), region, *model, stft);
    }

    std::vector<const SampleMatrix*> in, out;
    std::vector<int> in_idx, out_idx;
    for (size_t i = 0; i < mixture.size(); ++i) {
      const bool member = std::find(members.begin(), members.end(), static_cast<int>(i)) !=
                          members.end();
      (member ? in : out).push_back(mix_stems[i]);
      (member ? in_idx : out_idx).push_back(mixture[i]);
    }
    const RetrievalScores scores = normalize_scores(fit_source_weights(est, in, out), clip_id,
                                                    query_id);
    json score_list = json::array();
    for (size_t i = 0; i < in_idx.size(); ++i) {
      score_list.push_back({{"stem_id", c->track->stems[in_idx[i]].stem_id},
                            {"member", true},
                            {"score", scores.phi_hat[static_cast<Eigen::Index>(i)]}});
    }
    for (size_t i = 0; i < out_idx.size(); ++i) {
      score_list.push_back({{"stem_id", c->track->stems[out_idx[i]].stem_id},
                            {"member", false},
                            {"score", scores.phi_hat_perp[static_cast<Eigen::Index>(i)]}});
    }

    std::string key = clip_id + "|" + std::to_string(query_id) + "|" + mode + "|";
    if (mode == "model") key += std::to_string(version) + "|";
    char buf[40];
    for (Eigen::Index k = 0; k < d; ++k) {
      std::snprintf(buf, sizeof(buf), "%a,%a;", region.center[k], region.radii[k]);
      key += buf;
    }
    const int rate = c->track->sample_rate;
    const std::string token = CacheAudio(key, AudioChunk(est, rate));
    const std::string mix_token =
        CacheAudio(clip_id + "|" + std::to_string(query_id) + "|mixture",
                   AudioChunk(mix(mix_stems), rate));

    json resp = {{"clip_id", clip_id},
                 {"query_id", query_id},
                 {"mode", mode},
                 {"member_stems", StemIds(*c, in_idx)},
                 {"snr_db", snr(est, reference)},
                 {"scores", score_list},
                 {"degenerate", scores.raw.degenerate},
                 {"center", Vec(region.center)},
                 {"radii", Vec(region.radii)},
                 {"audio_url", "/audio/" + token},
                 {"mixture_url", "/audio/" + mix_token}};
    if (mode == "model") resp["model_version"] = version;
    return Ok(resp);
  } catch (const json::exception& e) {
    return Error(400, "invalid_request", e.what());
  } catch (const BadRequest& e) {
    return Error(400, "invalid_ellipse", e.what());
  }
}

HttpResponse Service::Audio(const std::string& token) const {
  std::shared_ptr<const std::string> bytes;
  {
    std::lock_guard<std::mutex> lock(audio_mu_);
    const auto it = audio_.find(token);
    if (it != audio_.end()) bytes = it->second;
  }
  if (!bytes) return Error(404, "unknown_token", "no audio for token " + token);
  return {200, *bytes, "audio/wav"};
}

HttpResponse Service::SwapModel(const std::string& body) {
  try {
    const json req = json::parse(body);
    const std::string path = req.at("path").get<std::string>();
    if (!std::filesystem::exists(path)) return Error(404, "unknown_model", "no file " + path);
    auto model = std::make_shared<const SeparatorModel>(LoadModel(path));
    SetModel(std::move(model));
    return Ok({{"model_version", CurrentModel().second}});
  } catch (const json::exception& e) {
    return Error(400, "invalid_request", e.what());
  } catch (const std::exception& e) {
    return Error(400, "invalid_model", e.what());
  }
}

void Service::Mount() {
  server_ = std::make_unique<httplib::Server>();
  auto send = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  auto guarded = [send](auto handler) {
    return [send, handler](const httplib::Request& req, httplib::Response& res) {
      try {
        send(res, handler(req));
      } catch (const std::exception& e) {
        send(res, Error(500, "internal", e.what()));
      }
    };
  };
  server_->Get("/clips", guarded([this](const httplib::Request&) { return Clips(); }));
  server_->Get(R"(/clips/([^/]+)/projection)",
               guarded([this](const httplib::Request& req) {
                 const auto param = [&](const char* name, int def) {
                   return req.has_param(name) ? std::stoi(req.get_param_value(name)) : def;
                 };
                 return Projection(req.matches[1], param("i", 0), param("j", 1));
               }));
  server_->Get(R"(/clips/([^/]+)/queries)",
               guarded([this](const httplib::Request& req) { return Queries(req.matches[1]); }));
  server_->Post("/separate",
                guarded([this](const httplib::Request& req) { return Separate(req.body); }));
  server_->Get(R"(/audio/([0-9a-f]+))",
               guarded([this](const httplib::Request& req) { return Audio(req.matches[1]); }));
  server_->Post("/model",
                guarded([this](const httplib::Request& req) { return SwapModel(req.body); }));
}

int Service::Start(const std::string& host, int port) {
  Stop();
  Mount();
  const int bound = port == 0 ? server_->bind_to_any_port(host.c_str())
                              : (server_->bind_to_port(host.c_str(), port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void Service::Stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
  server_.reset();
}

void Service::Listen(const std::string& host, int port) {
  Mount();
  if (!server_->listen(host.c_str(), port)) {
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace regionsep
