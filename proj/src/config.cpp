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

#include "cbasr/config.hpp"

#include <set>

#include "cbasr/error.hpp"
#include "cbasr/hash.hpp"
#include "cbasr/mock_backend.hpp"
#include "cbasr/remote_backend.hpp"
#include "cbasr/storage.hpp"

namespace cbasr {

using nlohmann::json;

namespace {

// Encoder depths for backends we can sanity-check before loading anything.
std::optional<int> known_encoder_layers(const std::string& backend) {
  if (backend == "mock") return kMockNumLayers;
  if (backend == "whisper-medium") return 24;
  return std::nullopt;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "backend",
      "backend.endpoint",
      "layers",
      "tts.provider",
      "tts.endpoint",
      "tts.voice_zh",
      "tts.voice_en",
      "tts.cache_dir",
      "classifier.architecture",
      "classifier.epochs",
      "classifier.batch_size",
      "classifier.learning_rate",
      "classifier.entity_axis_target",
      "classifier.val_fraction",
      "classifier.num_threads",
      "sampling.positives_per_utterance",
      "sampling.random_negatives",
      "sampling.confusing_negatives",
      "sampling.neighbor_window",
      "vocab.min_len",
      "vocab.max_len",
      "vocab.size",
      "prompt.style",
      "language",
      "threshold",
      "beam",
      "seed",
      "parallelism",
  };
  return keys;
}

}  // namespace

json RunConfig::to_json() const {
  return json{{"backend", backend},
              {"backend.endpoint", backend_endpoint},
              {"layers", format_layer_range(layer_range)},
              {"tts.provider", tts_provider},
              {"tts.endpoint", tts_endpoint},
              {"tts.voice_zh", tts_voice_zh},
              {"tts.voice_en", tts_voice_en},
              {"tts.cache_dir", tts_cache_dir},
              {"classifier.architecture",
               kws_architecture_name(classifier.architecture)},
              {"classifier.epochs", classifier.epochs},
              {"classifier.batch_size", classifier.batch_size},
              {"classifier.learning_rate", classifier.learning_rate},
              {"classifier.entity_axis_target", classifier.entity_axis_target},
              {"classifier.val_fraction", classifier.val_fraction},
              {"classifier.num_threads", classifier.num_threads},
              {"sampling.positives_per_utterance",
               sampling.positives_per_utterance},
              {"sampling.random_negatives", sampling.random_negatives},
              {"sampling.confusing_negatives", sampling.confusing_negatives},
              {"sampling.neighbor_window", sampling.neighbor_window},
              {"vocab.min_len", vocab_min_len},
              {"vocab.max_len", vocab_max_len},
              {"vocab.size", vocab_size},
              {"prompt.style", prompt_style_name(prompt_style)},
              {"language", language_name(language)},
              {"threshold", threshold},
              {"beam", beam},
              {"seed", seed},
              {"parallelism", parallelism}};
}

std::string RunConfig::config_hash() const { return sha256_hex(to_json().dump()); }

uint64_t RunConfig::stage_seed(const std::string& stage) const {
  return derive_seed(seed, stage);
}

ConfigValidation validate_config_json(const json& file_values,
                                      const json& overrides) {
  ConfigValidation out;
  auto& errors = out.errors;

  json merged = file_values.is_null() ? json::object() : file_values;
  if (!merged.is_object()) {
    errors.push_back("config root must be a JSON object with dotted keys");
    return out;
  }
  for (auto& [key, value] : overrides.items()) merged[key] = value;

  for (auto& [key, value] : merged.items()) {
    (void)value;
    if (!known_keys().count(key)) {
      errors.push_back("unknown config key: " + key);
    }
  }

  RunConfig cfg;

  auto get_string = [&](const char* key, std::string* dst) {
    if (!merged.contains(key)) return;
    if (!merged[key].is_string()) {
      errors.push_back(std::string(key) + ": expected a string");
      return;
    }
    *dst = merged[key].get<std::string>();
  };
  auto get_number = [&](const char* key, auto* dst) {
    if (!merged.contains(key)) return;
    if (!merged[key].is_number()) {
      errors.push_back(std::string(key) + ": expected a number");
      return;
    }
    *dst = merged[key].get<std::decay_t<decltype(*dst)>>();
  };

  get_string("backend", &cfg.backend);
  get_string("backend.endpoint", &cfg.backend_endpoint);
  get_string("tts.provider", &cfg.tts_provider);
  get_string("tts.endpoint", &cfg.tts_endpoint);
  get_string("tts.voice_zh", &cfg.tts_voice_zh);
  get_string("tts.voice_en", &cfg.tts_voice_en);
  get_string("tts.cache_dir", &cfg.tts_cache_dir);

  if (cfg.backend != "mock" && cfg.backend != "whisper-medium") {
    errors.push_back("backend: unknown backend '" + cfg.backend +
                     "' (want mock or whisper-medium)");
  }
  if (cfg.tts_provider != "mock" && cfg.tts_provider != "http") {
    errors.push_back("tts.provider: unknown provider '" + cfg.tts_provider +
                     "' (want mock or http)");
  }

  if (merged.contains("layers")) {
    if (!merged["layers"].is_string()) {
      errors.push_back("layers: expected a string like \"10:21\"");
    } else {
      try {
        cfg.layer_range = parse_layer_range(merged["layers"].get<std::string>());
      } catch (const Error& e) {
        errors.push_back(std::string("layers: ") + e.what());
      }
    }
  }
  if (auto depth = known_encoder_layers(cfg.backend)) {
    for (int l : cfg.layer_range) {
      if (l < 1 || l > *depth) {
        errors.push_back("layers: layer " + std::to_string(l) +
                         " outside [1, " + std::to_string(*depth) + "] for " +
                         cfg.backend);
        break;
      }
    }
  }

  if (merged.contains("classifier.architecture")) {
    try {
      cfg.classifier.architecture = parse_kws_architecture(
          merged["classifier.architecture"].get<std::string>());
    } catch (const std::exception& e) {
      errors.push_back(std::string("classifier.architecture: ") + e.what());
    }
  }
  get_number("classifier.epochs", &cfg.classifier.epochs);
  get_number("classifier.batch_size", &cfg.classifier.batch_size);
  get_number("classifier.learning_rate", &cfg.classifier.learning_rate);
  get_number("classifier.entity_axis_target",
             &cfg.classifier.entity_axis_target);
  get_number("classifier.val_fraction", &cfg.classifier.val_fraction);
  get_number("classifier.num_threads", &cfg.classifier.num_threads);
  if (cfg.classifier.epochs < 1) errors.push_back("classifier.epochs: must be >= 1");
  if (cfg.classifier.batch_size < 1)
    errors.push_back("classifier.batch_size: must be >= 1");
  if (cfg.classifier.learning_rate <= 0)
    errors.push_back("classifier.learning_rate: must be positive");
  if (cfg.classifier.entity_axis_target < 1)
    errors.push_back("classifier.entity_axis_target: must be >= 1");
  if (cfg.classifier.val_fraction < 0 || cfg.classifier.val_fraction >= 1)
    errors.push_back("classifier.val_fraction: must be in [0, 1)");
  if (cfg.classifier.num_threads < 1)
    errors.push_back("classifier.num_threads: must be >= 1");

  get_number("sampling.positives_per_utterance",
             &cfg.sampling.positives_per_utterance);
  get_number("sampling.random_negatives", &cfg.sampling.random_negatives);
  get_number("sampling.confusing_negatives", &cfg.sampling.confusing_negatives);
  get_number("sampling.neighbor_window", &cfg.sampling.neighbor_window);
  if (cfg.sampling.positives_per_utterance < 0)
    errors.push_back("sampling.positives_per_utterance: must be >= 0");
  if (cfg.sampling.random_negatives < 0)
    errors.push_back("sampling.random_negatives: must be >= 0");
  if (cfg.sampling.confusing_negatives < 0)
    errors.push_back("sampling.confusing_negatives: must be >= 0");
  if (cfg.sampling.neighbor_window < 1)
    errors.push_back("sampling.neighbor_window: must be >= 1");

  get_number("vocab.min_len", &cfg.vocab_min_len);
  get_number("vocab.max_len", &cfg.vocab_max_len);
  get_number("vocab.size", &cfg.vocab_size);
  if (cfg.vocab_min_len < 1 || cfg.vocab_max_len < cfg.vocab_min_len) {
    errors.push_back("vocab.min_len/vocab.max_len: need 1 <= min <= max");
  }

  if (merged.contains("prompt.style")) {
    try {
      cfg.prompt_style =
          parse_prompt_style(merged["prompt.style"].get<std::string>());
    } catch (const std::exception& e) {
      errors.push_back(std::string("prompt.style: ") + e.what());
    }
  }
  if (merged.contains("language")) {
    try {
      cfg.language = parse_language(merged["language"].get<std::string>());
    } catch (const std::exception& e) {
      errors.push_back(std::string("language: ") + e.what());
    }
  }

  get_number("threshold", &cfg.threshold);
  get_number("beam", &cfg.beam);
  get_number("seed", &cfg.seed);
  get_number("parallelism", &cfg.parallelism);
  if (cfg.beam < 1) errors.push_back("beam: must be >= 1");
  if (cfg.parallelism < 1) errors.push_back("parallelism: must be >= 1");

  // Stage seeds derive from the one top-level seed.
  cfg.classifier.seed = cfg.stage_seed("train-kws");
  cfg.sampling.seed = cfg.stage_seed("synth-dataset");
  cfg.sampling.parallelism = cfg.parallelism;

  if (errors.empty()) out.config = std::move(cfg);
  return out;
}

ConfigValidation validate_config_file(const std::string& path,
                                      const json& overrides) {
  json file_values;
  try {
    file_values = json::parse(read_text_file(path));
  } catch (const Error& e) {
    ConfigValidation out;
    out.errors.push_back(e.what());
    return out;
  } catch (const json::exception& e) {
    ConfigValidation out;
    out.errors.push_back(path + ": bad JSON: " + e.what());
    return out;
  }
  return validate_config_json(file_values, overrides);
}

std::unique_ptr<AsrBackend> make_backend(const RunConfig& cfg) {
  if (cfg.backend == "mock") return std::make_unique<MockBackend>();
  if (cfg.backend == "whisper-medium") {
    return std::make_unique<RemoteBackend>(cfg.backend_endpoint);
  }
  throw Error(ErrorKind::kConfig, "unknown backend: " + cfg.backend);
}

std::shared_ptr<TtsClient> make_tts(const RunConfig& cfg) {
  std::shared_ptr<TtsClient> inner;
  if (cfg.tts_provider == "mock") {
    inner = std::make_shared<MockTtsClient>();
  } else if (cfg.tts_provider == "http") {
    inner = std::make_shared<HttpTtsClient>(cfg.tts_endpoint);
  } else {
    throw Error(ErrorKind::kConfig, "unknown TTS provider: " + cfg.tts_provider);
  }
  if (!cfg.tts_cache_dir.empty()) {
    return std::make_shared<CachingTtsClient>(inner, cfg.tts_cache_dir);
  }
  return inner;
}

}  // namespace cbasr
