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

#include "cbasr/backend.hpp"

#include <algorithm>
#include <sstream>

#include "cbasr/error.hpp"

namespace cbasr {

const char* language_name(Language lang) {
  switch (lang) {
    case Language::kZh: return "zh";
    case Language::kEn: return "en";
    case Language::kAuto: return "auto";
  }
  return "auto";
}

Language parse_language(const std::string& name) {
  if (name == "zh") return Language::kZh;
  if (name == "en") return Language::kEn;
  if (name == "auto" || name.empty()) return Language::kAuto;
  throw Error(ErrorKind::kConfig, "unknown language: " + name);
}

std::vector<int> default_layer_range() {
  std::vector<int> layers(12);
  for (int i = 0; i < 12; ++i) layers[i] = 10 + i;
  return layers;
}

std::vector<int> parse_layer_range(const std::string& text) {
  std::vector<int> out;
  if (text.empty()) throw Error(ErrorKind::kConfig, "empty layer range");
  if (text.find(':') != std::string::npos) {
    size_t colon = text.find(':');
    int lo = 0, hi = 0;
    try {
      lo = std::stoi(text.substr(0, colon));
      hi = std::stoi(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfig, "bad layer range: " + text);
    }
    if (lo < 1 || hi < lo)
      throw Error(ErrorKind::kConfig, "bad layer range: " + text);
    for (int l = lo; l <= hi; ++l) out.push_back(l);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfig, "bad layer list: " + text);
    }
  }
  if (out.empty()) throw Error(ErrorKind::kConfig, "empty layer range");
  return out;
}

std::string format_layer_range(const std::vector<int>& layers) {
  bool contiguous = !layers.empty();
  for (size_t i = 1; i < layers.size(); ++i) {
    if (layers[i] != layers[i - 1] + 1) contiguous = false;
  }
  std::ostringstream out;
  if (contiguous && layers.size() > 1) {
    out << layers.front() << ":" << layers.back();
  } else {
    for (size_t i = 0; i < layers.size(); ++i) {
      if (i) out << ",";
      out << layers[i];
    }
  }
  return out.str();
}

void check_audio(const AudioBuffer& audio) {
  if (audio.sample_rate <= 0)
    throw Error(ErrorKind::kInput, "audio sample rate must be positive");
  if (audio.samples.empty())
    throw Error(ErrorKind::kInput, "empty audio buffer");
}

void check_layers(const std::vector<int>& layers, const BackendInfo& info) {
  if (layers.empty())
    throw Error(ErrorKind::kConfig, "requested layer list is empty");
  for (int l : layers) {
    if (l < 1 || l > info.num_encoder_layers) {
      throw Error(ErrorKind::kConfig,
                  "layer index " + std::to_string(l) + " outside [1, " +
                      std::to_string(info.num_encoder_layers) + "] for model " +
                      info.model_id);
    }
  }
}

void check_decode_params(const DecodeParams& params) {
  if (params.beam_size < 1)
    throw Error(ErrorKind::kInput, "beam size must be >= 1");
}

}  // namespace cbasr
