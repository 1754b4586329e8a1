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

#include "regionsep/wav.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace regionsep {
namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV codec assumes a little-endian host");

constexpr uint16_t kFormatIeeeFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

void PutU32(std::string& out, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void PutU16(std::string& out, uint16_t v) {
  char b[2];
  std::memcpy(b, &v, 2);
  out.append(b, 2);
}

uint32_t GetU32(const std::string& in, size_t pos) {
  if (pos + 4 > in.size()) throw std::runtime_error("wav: truncated header");
  uint32_t v;
  std::memcpy(&v, in.data() + pos, 4);
  return v;
}

uint16_t GetU16(const std::string& in, size_t pos) {
  if (pos + 2 > in.size()) throw std::runtime_error("wav: truncated header");
  uint16_t v;
  std::memcpy(&v, in.data() + pos, 2);
  return v;
}

}  // namespace

void QuantizeToFloat(SampleMatrix& samples) {
  samples = samples.cast<float>().cast<double>();
}

std::string EncodeWav(const AudioChunk& audio) {
  const auto channels = static_cast<uint16_t>(audio.channels());
  if (channels < 1 || channels > 2) {
    throw std::invalid_argument("wav: only 1 or 2 channels are supported");
  }
  const auto frames = static_cast<uint32_t>(audio.frames());
  const uint32_t data_bytes = frames * channels * 4;
  std::string out;
  out.reserve(44 + data_bytes);
  out.append("RIFF");
  PutU32(out, 36 + data_bytes);
  out.append("WAVE");
  out.append("fmt ");
  PutU32(out, 16);
  PutU16(out, kFormatIeeeFloat);
  PutU16(out, channels);
  PutU32(out, static_cast<uint32_t>(audio.sample_rate));
  PutU32(out, static_cast<uint32_t>(audio.sample_rate) * channels * 4);
  PutU16(out, static_cast<uint16_t>(channels * 4));
  PutU16(out, 32);
  out.append("data");
  PutU32(out, data_bytes);
  for (uint32_t n = 0; n < frames; ++n) {
    for (uint16_t c = 0; c < channels; ++c) {
      const float v = static_cast<float>(audio.samples(c, n));
      char b[4];
      std::memcpy(b, &v, 4);
      out.append(b, 4);
    }
  }
  return out;
}

AudioChunk DecodeWav(const std::string& bytes) {
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0) {
    throw std::runtime_error("wav: missing RIFF/WAVE header");
  }
  size_t pos = 12;
  bool have_fmt = false;
  uint16_t channels = 0;
  uint32_t rate = 0;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const uint32_t size = GetU32(bytes, pos + 4);
    const size_t body = pos + 8;
    if (body + size > bytes.size()) {
      throw std::runtime_error("wav: chunk '" + id + "' overruns file");
    }
    if (id == "fmt ") {
      if (size < 16) throw std::runtime_error("wav: fmt chunk too small");
      uint16_t format = GetU16(bytes, body);
      channels = GetU16(bytes, body + 2);
      rate = GetU32(bytes, body + 4);
      const uint16_t bits = GetU16(bytes, body + 14);
      if (format == kFormatExtensible && size >= 40) {
        format = GetU16(bytes, body + 24);
      }
      if (format != kFormatIeeeFloat || bits != 32) {
        throw std::runtime_error(
            "wav: only 32-bit IEEE float samples are supported");
      }
      if (channels < 1 || channels > 2) {
        throw std::runtime_error("wav: only 1 or 2 channels are supported");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw std::runtime_error("wav: data before fmt chunk");
      const uint32_t frames = size / (4u * channels);
      SampleMatrix samples(channels, frames);
      const char* p = bytes.data() + body;
      for (uint32_t n = 0; n < frames; ++n) {
        for (uint16_t c = 0; c < channels; ++c) {
          float v;
          std::memcpy(&v, p, 4);
          p += 4;
          samples(c, n) = v;
        }
      }
      return AudioChunk(std::move(samples), static_cast<int>(rate));
    }
    pos = body + size + (size & 1u);
  }
  throw std::runtime_error("wav: no data chunk");
}

void WriteWav(const std::filesystem::path& path, const AudioChunk& audio) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::string bytes = EncodeWav(audio);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

AudioChunk ReadWav(const std::filesystem::path& path,
                   std::optional<int> expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  AudioChunk audio;
  try {
    audio = DecodeWav(ss.str());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (expected_rate && audio.sample_rate != *expected_rate) {
    throw std::runtime_error(path.string() + ": sample rate " +
                             std::to_string(audio.sample_rate) +
                             " does not match configured " +
                             std::to_string(*expected_rate));
  }
  return audio;
}

}  // namespace regionsep
