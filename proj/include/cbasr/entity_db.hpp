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

#ifndef CBASR_ENTITY_DB_HPP_
#define CBASR_ENTITY_DB_HPP_

#include <optional>
#include <string>
#include <vector>

#include "cbasr/backend.hpp"
#include "cbasr/tts.hpp"

namespace cbasr {

enum class LanguageHint { kZh, kEn, kMixed };

const char* language_hint_name(LanguageHint hint);
LanguageHint parse_language_hint(const std::string& name);
LanguageHint detect_language_hint(const std::string& text);

struct EntityWord {
  std::string surface;     // display text, unique within a database
  std::string normalized;  // matching text
  LanguageHint language_hint = LanguageHint::kMixed;
};

EntityWord make_entity_word(const std::string& surface);

// One entity word plus its hidden states derived from synthetic speech.
struct EntityRecord {
  EntityWord word;
  LayerStack hidden;
  std::string source_audio_key;  // TTS cache key
};

bool operator==(const EntityWord& a, const EntityWord& b);
bool operator==(const EntityRecord& a, const EntityRecord& b);

// Immutable after build; records are sorted by normalized word so the
// database is independent of insertion order.
struct EntityDatabase {
  std::vector<EntityRecord> records;
  std::vector<int> layer_range;
  // backend fingerprint
  std::string model_id;
  int hidden_dim = 0;
  double frame_duration_s = 0.0;

  const EntityRecord* find(const std::string& normalized) const;
};

bool operator==(const EntityDatabase& a, const EntityDatabase& b);

struct EntityBuildOptions {
  std::string voice_zh = "voice-zh";
  std::string voice_en = "voice-en";
  double rate = 1.0;
  int parallelism = 4;
};

struct SkippedWord {
  std::string surface;
  std::string reason;
};

struct EntityBuildReport {
  size_t built = 0;
  std::vector<SkippedWord> skipped;
};

// Entity onboarding: text -> TTS audio -> cropped multi-layer hidden
// states. A single word's TTS failure is recorded as skipped, never fatal.
EntityDatabase build_entity_db(const std::vector<EntityWord>& words,
                               TtsClient& tts, const AsrBackend& backend,
                               const std::vector<int>& layer_range,
                               const EntityBuildOptions& opts = {},
                               EntityBuildReport* report = nullptr);

// Incremental add; existing records are untouched. Adding a word that is
// already present (after normalization) is an input error.
EntityDatabase add_entity_words(const EntityDatabase& db,
                                const std::vector<EntityWord>& new_words,
                                TtsClient& tts, const AsrBackend& backend,
                                const EntityBuildOptions& opts = {},
                                EntityBuildReport* report = nullptr);

// Directory layout: <dir>/manifest.json + <dir>/tensors.bin (raw float32le
// with per-record offsets). load(save(db)) reproduces the database
// bit-exactly, tensor bytes included.
void save_entity_db(const EntityDatabase& db, const std::string& dir);
EntityDatabase load_entity_db(
    const std::string& dir,
    const std::optional<BackendInfo>& active_backend = std::nullopt);

// Reads one entity per line, UTF-8, skipping blanks and '#' comments.
std::vector<EntityWord> read_words_file(const std::string& path);

}  // namespace cbasr

#endif  // CBASR_ENTITY_DB_HPP_
