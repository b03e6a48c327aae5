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

#ifndef CBASR_CONFIG_HPP_
#define CBASR_CONFIG_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbasr/backend.hpp"
#include "cbasr/dataset_gen.hpp"
#include "cbasr/kws.hpp"
#include "cbasr/pipeline.hpp"
#include "cbasr/tts.hpp"

namespace cbasr {

// Run configuration: one flat JSON object with dotted keys; CLI flags
// override file values. Defaults reproduce the reference hyperparameters
// (layers 10:21, beam 5, logit threshold 10, Adam 5e-5, batch 64, six
// epochs, 20k-word vocabulary).
struct RunConfig {
  std::string backend = "mock";  // mock | whisper-medium
  std::string backend_endpoint;  // model server URL for non-mock backends

  std::string tts_provider = "mock";  // mock | http
  std::string tts_endpoint;
  std::string tts_voice_zh = "voice-zh";
  std::string tts_voice_en = "voice-en";
  std::string tts_cache_dir;  // empty: no on-disk cache

  std::vector<int> layer_range = default_layer_range();

  ClassifierConfig classifier;  // seeded by stage_seed("train-kws")
  SamplingConfig sampling;      // seeded by stage_seed("synth-dataset")

  int vocab_min_len = 2;
  int vocab_max_len = 8;
  size_t vocab_size = 20000;

  PromptStyle prompt_style = PromptStyle::kSpokenForm;
  Language language = Language::kZh;
  double threshold = kDefaultKwsThreshold;
  int beam = 5;
  uint64_t seed = 0;
  int parallelism = 4;

  nlohmann::json to_json() const;  // effective config, every key present
  std::string config_hash() const;
  uint64_t stage_seed(const std::string& stage) const;
};

struct ConfigValidation {
  std::optional<RunConfig> config;
  std::vector<std::string> errors;  // every violation, not just the first

  bool ok() const { return errors.empty(); }
};

// `overrides` (flat dotted keys, same schema) wins over the file contents.
ConfigValidation validate_config_json(const nlohmann::json& file_values,
                                      const nlohmann::json& overrides = {});
ConfigValidation validate_config_file(const std::string& path,
                                      const nlohmann::json& overrides = {});

// Wiring: instantiate the configured backend / TTS client.
std::unique_ptr<AsrBackend> make_backend(const RunConfig& cfg);
std::shared_ptr<TtsClient> make_tts(const RunConfig& cfg);

}  // namespace cbasr

#endif  // CBASR_CONFIG_HPP_
