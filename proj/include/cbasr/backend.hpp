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

#ifndef CBASR_BACKEND_HPP_
#define CBASR_BACKEND_HPP_

#include <optional>
#include <string>
#include <vector>

#include "cbasr/audio.hpp"

namespace cbasr {

// Per-utterance encoder hidden states for a contiguous range of layers.
// data is row-major layers x frames x dims. Layer indices are 1-based.
struct LayerStack {
  std::vector<int> layers;
  int frames = 0;
  int dims = 0;
  double frame_duration_s = 0.0;
  std::vector<float> data;

  const float* vec(int layer_pos, int frame) const {
    return data.data() +
           (static_cast<size_t>(layer_pos) * frames + frame) * dims;
  }
  float* vec(int layer_pos, int frame) {
    return data.data() +
           (static_cast<size_t>(layer_pos) * frames + frame) * dims;
  }
  size_t size() const { return data.size(); }
};

enum class Language { kZh, kEn, kAuto };

const char* language_name(Language lang);
Language parse_language(const std::string& name);

struct DecodeParams {
  int beam_size = 5;
  Language language = Language::kAuto;
  std::optional<std::string> prompt;
};

struct Transcript {
  std::string text;
  double avg_logprob = 0.0;
};

struct BackendInfo {
  std::string model_id;
  int num_encoder_layers = 0;
  int hidden_dim = 0;
  double frame_duration_s = 0.0;
};

// Uniform contract over a Whisper-family model. Implementations are
// immutable after construction; encode/decode are safe for concurrent
// callers. encode() crops the returned frames to the real audio duration
// (ceil(duration / frame_duration_s)) so padded silence never reaches the
// similarity maps.
class AsrBackend {
 public:
  virtual ~AsrBackend() = default;

  virtual LayerStack encode(const AudioBuffer& audio,
                            const std::vector<int>& layers) const = 0;
  virtual Transcript decode(const AudioBuffer& audio,
                            const DecodeParams& params) const = 0;
  virtual BackendInfo info() const = 0;
};

// Default layer range 10..21 inclusive, 1-based: 12 channels.
std::vector<int> default_layer_range();

// Parses "10:21" (inclusive) or a comma list "10,11,12".
std::vector<int> parse_layer_range(const std::string& text);
std::string format_layer_range(const std::vector<int>& layers);

// Shared precondition checks for encode/decode implementations.
void check_audio(const AudioBuffer& audio);
void check_layers(const std::vector<int>& layers, const BackendInfo& info);
void check_decode_params(const DecodeParams& params);

}  // namespace cbasr

#endif  // CBASR_BACKEND_HPP_
