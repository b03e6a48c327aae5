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

#include "cbasr/mock_backend.hpp"

#include <cmath>
#include <cstring>

#include "cbasr/error.hpp"
#include "cbasr/text.hpp"

namespace cbasr {

namespace {

constexpr float kMarker = 0.9375f;
constexpr int kPayloadBits = 21;  // enough for any Unicode codepoint

void encode_char_block(char32_t cp, std::vector<float>* out) {
  size_t base = out->size();
  out->resize(base + kMockSamplesPerChar, 0.0f);
  (*out)[base] = kMarker;
  for (int bit = 0; bit < kPayloadBits; ++bit) {
    bool set = (cp >> (kPayloadBits - 1 - bit)) & 1;
    (*out)[base + 1 + bit] = set ? 0.5f : -0.5f;
  }
  // Fill the rest with a tone keyed by the codepoint so the waveform looks
  // like audio when dumped to a WAV file.
  double freq = 200.0 + static_cast<double>(cp % 800);
  for (int i = 1 + kPayloadBits; i < kMockSamplesPerChar; ++i) {
    double t = static_cast<double>(i) / kCanonicalSampleRate;
    (*out)[base + i] =
        static_cast<float>(0.3 * std::sin(2.0 * M_PI * freq * t));
  }
}

char32_t decode_char_block(const AudioBuffer& audio, size_t base) {
  if (base >= audio.samples.size() || audio.samples[base] < 0.7f) {
    return 0xFFFD;
  }
  char32_t cp = 0;
  for (int bit = 0; bit < kPayloadBits; ++bit) {
    size_t idx = base + 1 + bit;
    bool set = idx < audio.samples.size() && audio.samples[idx] > 0.0f;
    cp = (cp << 1) | (set ? 1 : 0);
  }
  if (cp > 0x10FFFF) return 0xFFFD;
  return cp;
}

}  // namespace

AudioBuffer mock_tts(const std::string& text) {
  if (text.empty())
    throw Error(ErrorKind::kInput, "mock TTS needs non-empty text");
  AudioBuffer out;
  out.sample_rate = kCanonicalSampleRate;
  for (char32_t cp : utf8_decode(text)) encode_char_block(cp, &out.samples);
  return out;
}

std::string mock_tts_decode(const AudioBuffer& audio) {
  std::vector<char32_t> cps;
  size_t blocks =
      (audio.samples.size() + kMockSamplesPerChar - 1) / kMockSamplesPerChar;
  for (size_t b = 0; b < blocks; ++b) {
    cps.push_back(decode_char_block(audio, b * kMockSamplesPerChar));
  }
  return utf8_encode(cps);
}

int mock_basis_index(char32_t cp) {
  return static_cast<int>(cp % kMockHiddenDim);
}

LayerStack MockBackend::encode(const AudioBuffer& audio,
                               const std::vector<int>& layers) const {
  check_audio(audio);
  check_layers(layers, info());

  AudioBuffer canon = audio.sample_rate == kCanonicalSampleRate
                          ? audio
                          : resample_linear(audio, kCanonicalSampleRate);
  // One frame per 0.1 s, cropped to the real duration.
  int frames = static_cast<int>(
      (canon.samples.size() + kMockSamplesPerChar - 1) / kMockSamplesPerChar);

  LayerStack out;
  out.layers = layers;
  out.frames = frames;
  out.dims = kMockHiddenDim;
  out.frame_duration_s = kMockFrameDuration;
  out.data.assign(
      static_cast<size_t>(layers.size()) * frames * kMockHiddenDim, 0.0f);
  for (int f = 0; f < frames; ++f) {
    char32_t cp =
        decode_char_block(canon, static_cast<size_t>(f) * kMockSamplesPerChar);
    int basis = mock_basis_index(cp);
    for (size_t l = 0; l < layers.size(); ++l) {
      out.vec(static_cast<int>(l), f)[basis] = 1.0f;
    }
  }
  return out;
}

Transcript MockBackend::decode(const AudioBuffer& audio,
                               const DecodeParams& params) const {
  check_audio(audio);
  check_decode_params(params);

  AudioBuffer canon = audio.sample_rate == kCanonicalSampleRate
                          ? audio
                          : resample_linear(audio, kCanonicalSampleRate);
  std::vector<char32_t> truth = utf8_decode(mock_tts_decode(canon));
  const std::string prompt =
      params.prompt.has_value() ? *params.prompt : std::string();

  // A confused character survives when any word (contiguous run of >= 2
  // characters around it) occurs verbatim in the prompt.
  auto rescued = [&](size_t pos) {
    if (prompt.empty()) return false;
    const size_t n = truth.size();
    const size_t max_len = std::min<size_t>(n, 16);
    for (size_t len = 2; len <= max_len; ++len) {
      size_t lo = pos + 1 >= len ? pos + 1 - len : 0;
      for (size_t start = lo; start <= pos && start + len <= n; ++start) {
        std::vector<char32_t> sub(truth.begin() + start,
                                  truth.begin() + start + len);
        if (prompt.find(utf8_encode(sub)) != std::string::npos) return true;
      }
    }
    return false;
  };

  std::vector<char32_t> out;
  out.reserve(truth.size());
  int substitutions = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    auto it = confusion_.find(truth[i]);
    if (it != confusion_.end() && !rescued(i)) {
      out.push_back(it->second);
      ++substitutions;
    } else {
      out.push_back(truth[i]);
    }
  }

  Transcript result;
  result.text = utf8_encode(out);
  result.avg_logprob = -0.05 - 0.01 * substitutions;
  if (rig_ == DecodeRig::kRepeatWhenPrompted && !prompt.empty()) {
    std::string repeated;
    for (int i = 0; i < 30; ++i) repeated += result.text;
    result.text = repeated;
  }
  return result;
}

BackendInfo MockBackend::info() const {
  return BackendInfo{"mock", kMockNumLayers, kMockHiddenDim,
                     kMockFrameDuration};
}

}  // namespace cbasr
