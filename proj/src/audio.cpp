// Copyright (c) 2026 cbasr authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cbasr/audio.hpp"

#include <cstring>
#include <fstream>

#include "cbasr/error.hpp"

namespace cbasr {

namespace {

uint32_t read_u32(const std::string& b, size_t off) {
  uint32_t v;
  std::memcpy(&v, b.data() + off, 4);
  return v;
}

uint16_t read_u16(const std::string& b, size_t off) {
  uint16_t v;
  std::memcpy(&v, b.data() + off, 2);
  return v;
}

void append_u32(std::string& b, uint32_t v) {
  b.append(reinterpret_cast<const char*>(&v), 4);
}

void append_u16(std::string& b, uint16_t v) {
  b.append(reinterpret_cast<const char*>(&v), 2);
}

}  // namespace

AudioBuffer parse_wav(const std::string& bytes) {
  if (bytes.size() < 44 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0) {
    throw Error(ErrorKind::kInput, "not a RIFF/WAVE file");
  }

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  size_t data_off = 0, data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    std::string id = bytes.substr(pos, 4);
    uint32_t chunk_len = read_u32(bytes, pos + 4);
    size_t body = pos + 8;
    if (body + chunk_len > bytes.size()) {
      chunk_len = static_cast<uint32_t>(bytes.size() - body);
    }
    if (id == "fmt ") {
      if (chunk_len < 16)
        throw Error(ErrorKind::kInput, "truncated WAV fmt chunk");
      format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      sample_rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
    } else if (id == "data") {
      data_off = body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);
  }

  if (sample_rate == 0 || channels == 0 || data_off == 0) {
    throw Error(ErrorKind::kInput, "WAV file missing fmt or data chunk");
  }
  if (format != 1 && format != 3) {
    throw Error(ErrorKind::kInput,
                "unsupported WAV format " + std::to_string(format) +
                    " (want 16-bit PCM or float32)");
  }

  AudioBuffer out;
  out.sample_rate = static_cast<int>(sample_rate);
  if (format == 1) {
    if (bits != 16)
      throw Error(ErrorKind::kInput,
                  "unsupported PCM bit depth " + std::to_string(bits));
    size_t frames = data_len / (2 * channels);
    out.samples.resize(frames);
    for (size_t f = 0; f < frames; ++f) {
      double acc = 0.0;
      for (int ch = 0; ch < channels; ++ch) {
        int16_t s;
        std::memcpy(&s, bytes.data() + data_off + (f * channels + ch) * 2, 2);
        acc += s / 32768.0;
      }
      out.samples[f] = static_cast<float>(acc / channels);
    }
  } else {
    if (bits != 32)
      throw Error(ErrorKind::kInput,
                  "unsupported float bit depth " + std::to_string(bits));
    size_t frames = data_len / (4 * channels);
    out.samples.resize(frames);
    for (size_t f = 0; f < frames; ++f) {
      double acc = 0.0;
      for (int ch = 0; ch < channels; ++ch) {
        float s;
        std::memcpy(&s, bytes.data() + data_off + (f * channels + ch) * 4, 4);
        acc += s;
      }
      out.samples[f] = static_cast<float>(acc / channels);
    }
  }

  if (out.sample_rate != kCanonicalSampleRate) {
    out = resample_linear(out, kCanonicalSampleRate);
  }
  return out;
}

AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open audio file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  try {
    return parse_wav(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

std::string wav_bytes(const AudioBuffer& audio) {
  const uint32_t data_len = static_cast<uint32_t>(audio.samples.size() * 4);
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  append_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  append_u32(out, 16);
  append_u16(out, 3);  // IEEE float
  append_u16(out, 1);  // mono
  append_u32(out, static_cast<uint32_t>(audio.sample_rate));
  append_u32(out, static_cast<uint32_t>(audio.sample_rate) * 4);
  append_u16(out, 4);
  append_u16(out, 32);
  out += "data";
  append_u32(out, data_len);
  out.append(reinterpret_cast<const char*>(audio.samples.data()), data_len);
  return out;
}

void write_wav(const std::string& path, const AudioBuffer& audio) {
  std::ofstream of(path, std::ios::binary | std::ios::trunc);
  if (!of) throw Error(ErrorKind::kIo, "cannot write audio file: " + path);
  std::string bytes = wav_bytes(audio);
  of.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!of) throw Error(ErrorKind::kIo, "short write: " + path);
}

AudioBuffer resample_linear(const AudioBuffer& audio, int target_rate) {
  if (target_rate <= 0)
    throw Error(ErrorKind::kInput, "target sample rate must be positive");
  if (audio.sample_rate == target_rate || audio.samples.empty()) {
    AudioBuffer out = audio;
    out.sample_rate = target_rate;
    return out;
  }
  const double ratio =
      static_cast<double>(audio.sample_rate) / static_cast<double>(target_rate);
  const size_t n_out = static_cast<size_t>(
      static_cast<double>(audio.samples.size()) / ratio + 0.5);
  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (size_t i = 0; i < n_out; ++i) {
    double src = i * ratio;
    size_t i0 = static_cast<size_t>(src);
    if (i0 >= audio.samples.size() - 1) {
      out.samples[i] = audio.samples.back();
      continue;
    }
    double frac = src - static_cast<double>(i0);
    out.samples[i] = static_cast<float>(audio.samples[i0] * (1.0 - frac) +
                                        audio.samples[i0 + 1] * frac);
  }
  return out;
}

}  // namespace cbasr
