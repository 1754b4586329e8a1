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

#ifndef REGIONSEP_WAV_H_
#define REGIONSEP_WAV_H_

#include <filesystem>
#include <optional>
#include <string>

#include "regionsep/signal.h"

namespace regionsep {

// 32-bit IEEE float WAV, little-endian, one or two channels.
std::string EncodeWav(const AudioChunk& audio);
AudioChunk DecodeWav(const std::string& bytes);

void WriteWav(const std::filesystem::path& path, const AudioChunk& audio);
// Throws std::runtime_error when the file is unreadable or malformed, or when
// `expected_rate` is set and differs from the header.
AudioChunk ReadWav(const std::filesystem::path& path,
                   std::optional<int> expected_rate = std::nullopt);

// Rounds every sample to the nearest float, so the in-memory signal matches
// what a WAV round trip produces.
void QuantizeToFloat(SampleMatrix& samples);

}  // namespace regionsep

#endif  // REGIONSEP_WAV_H_
