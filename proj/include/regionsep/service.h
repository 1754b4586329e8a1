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

// HTTP service over a precomputed dataset.
//
//   GET  /clips                     clip list
//   GET  /clips/{id}/projection     stem embeddings on axes (i, j), ?i=0&j=1
//   GET  /clips/{id}/queries        query specs of the clip
//   POST /separate                  render one region query
//   GET  /audio/{token}             WAV bytes of a rendered result
//   POST /model                     {"path": ...} replaces the model
//
// POST /separate body:
//   {"clip_id": "track003@12", "query_id": 4, "axes_pair": [0, 1],
//    "radii": [0.2, 0.1], "t": 0.5, "center": [...], "mode": "oracle"}
// The region keeps the spec's center and axes with radii at interpolation t,
// except that radii i and j take the given values. `center` is optional and
// holds either D values or the two coordinates (i, j). Failures return
// {"error": {"code": ..., "message": ...}}.

#ifndef REGIONSEP_SERVICE_H_
#define REGIONSEP_SERVICE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "regionsep/pipeline.h"
#include "regionsep/separator.h"

namespace httplib {
class Server;
}

namespace regionsep {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

class Service {
 public:
  explicit Service(DatasetView view);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  static std::unique_ptr<Service> Load(const std::filesystem::path& manifest,
                                       const std::filesystem::path& model = {});

  // Atomic replacement; a request sees either the old or the new model.
  void SetModel(std::shared_ptr<const SeparatorModel> model);
  // Current model and its version (0 when none has been loaded).
  std::pair<std::shared_ptr<const SeparatorModel>, int64_t> CurrentModel() const;
  bool has_oracle() const { return true; }
  const DatasetView& view() const { return view_; }

  // Handlers, usable without a socket.
  HttpResponse Clips() const;
  HttpResponse Projection(const std::string& clip_id, int i, int j) const;
  HttpResponse Queries(const std::string& clip_id) const;
  HttpResponse Separate(const std::string& body);
  HttpResponse Audio(const std::string& token) const;
  HttpResponse SwapModel(const std::string& body);

  // Binds `host`:`port` (0 picks a free port) and serves on a background
  // thread. Returns the bound port.
  int Start(const std::string& host = "127.0.0.1", int port = 0);
  void Stop();
  // Blocking variant used by the command-line tool.
  void Listen(const std::string& host, int port);

 private:
  std::vector<SampleMatrix> ClipStems(const ClipView& clip) const;
  std::string CacheAudio(const std::string& key, const AudioChunk& audio);
  void Mount();

  DatasetView view_;
  mutable std::mutex model_mu_;
  std::shared_ptr<const SeparatorModel> model_;
  int64_t model_version_ = 0;

  mutable std::mutex audio_mu_;
  std::map<std::string, std::shared_ptr<const std::string>> audio_;
  mutable std::mutex track_mu_;
  mutable std::map<std::string, std::shared_ptr<const StemTrack>> tracks_;

  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace regionsep

#endif  // REGIONSEP_SERVICE_H_
