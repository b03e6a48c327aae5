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

#include "cbasr/entity_db.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>

#include <json.hpp>

#include "cbasr/error.hpp"
#include "cbasr/parallel.hpp"
#include "cbasr/storage.hpp"
#include "cbasr/text.hpp"

namespace fs = std::filesystem;

namespace cbasr {

using nlohmann::json;

const char* language_hint_name(LanguageHint hint) {
  switch (hint) {
    case LanguageHint::kZh: return "zh";
    case LanguageHint::kEn: return "en";
    case LanguageHint::kMixed: return "mixed";
  }
  return "mixed";
}

LanguageHint parse_language_hint(const std::string& name) {
  if (name == "zh") return LanguageHint::kZh;
  if (name == "en") return LanguageHint::kEn;
  if (name == "mixed") return LanguageHint::kMixed;
  throw Error(ErrorKind::kInput, "unknown language hint: " + name);
}

LanguageHint detect_language_hint(const std::string& text) {
  bool has_han = false, has_latin = false;
  for (char32_t raw : utf8_decode(text)) {
    char32_t cp = fold_width(raw);
    if (is_han(cp)) has_han = true;
    if (is_latin_letter(cp)) has_latin = true;
  }
  if (has_han && has_latin) return LanguageHint::kMixed;
  if (has_han) return LanguageHint::kZh;
  if (has_latin) return LanguageHint::kEn;
  return LanguageHint::kMixed;
}

EntityWord make_entity_word(const std::string& surface) {
  EntityWord w;
  w.surface = surface;
  w.normalized = normalize_entity(surface);
  w.language_hint = detect_language_hint(surface);
  if (w.normalized.empty()) {
    throw Error(ErrorKind::kInput,
                "entity word is empty after normalization: '" + surface + "'");
  }
  return w;
}

bool operator==(const EntityWord& a, const EntityWord& b) {
  return a.surface == b.surface && a.normalized == b.normalized &&
         a.language_hint == b.language_hint;
}

bool operator==(const EntityRecord& a, const EntityRecord& b) {
  return a.word == b.word && a.source_audio_key == b.source_audio_key &&
         a.hidden.layers == b.hidden.layers &&
         a.hidden.frames == b.hidden.frames && a.hidden.dims == b.hidden.dims &&
         a.hidden.frame_duration_s == b.hidden.frame_duration_s &&
         a.hidden.data == b.hidden.data;
}

bool operator==(const EntityDatabase& a, const EntityDatabase& b) {
  return a.records == b.records && a.layer_range == b.layer_range &&
         a.model_id == b.model_id && a.hidden_dim == b.hidden_dim &&
         a.frame_duration_s == b.frame_duration_s;
}

const EntityRecord* EntityDatabase::find(const std::string& normalized) const {
  auto it = std::lower_bound(
      records.begin(), records.end(), normalized,
      [](const EntityRecord& r, const std::string& key) {
        return r.word.normalized < key;
      });
  if (it != records.end() && it->word.normalized == normalized) return &*it;
  return nullptr;
}

namespace {

void check_no_duplicates(const std::vector<EntityWord>& words) {
  std::set<std::string> seen;
  for (const auto& w : words) {
    if (!seen.insert(w.normalized).second) {
      throw Error(ErrorKind::kInput,
                  "duplicate entity word after normalization: '" + w.surface +
                      "' (" + w.normalized + ")");
    }
  }
}

const std::string& voice_for(const EntityWord& word,
                             const EntityBuildOptions& opts) {
  return word.language_hint == LanguageHint::kEn ? opts.voice_en
                                                 : opts.voice_zh;
}

std::vector<EntityRecord> encode_words(const std::vector<EntityWord>& words,
                                       TtsClient& tts,
                                       const AsrBackend& backend,
                                       const std::vector<int>& layer_range,
                                       const EntityBuildOptions& opts,
                                       EntityBuildReport* report) {
  std::vector<std::optional<EntityRecord>> slots(words.size());
  std::vector<std::optional<SkippedWord>> skipped(words.size());

  parallel_for_indexed(words.size(), opts.parallelism, [&](size_t i) {
    const EntityWord& word = words[i];
    try {
      TtsRequest req{word.surface, voice_for(word, opts), opts.rate};
      AudioBuffer audio = tts.synthesize(req);
      EntityRecord rec;
      rec.word = word;
      rec.hidden = backend.encode(audio, layer_range);
      rec.source_audio_key = tts_cache_key(req);
      slots[i] = std::move(rec);
    } catch (const std::exception& e) {
      skipped[i] = SkippedWord{word.surface, e.what()};
    }
  });

  std::vector<EntityRecord> records;
  records.reserve(words.size());
  for (size_t i = 0; i < words.size(); ++i) {
    if (slots[i].has_value()) {
      records.push_back(std::move(*slots[i]));
    } else if (report != nullptr && skipped[i].has_value()) {
      report->skipped.push_back(*skipped[i]);
    }
  }
  if (report != nullptr) report->built += records.size();
  return records;
}

void sort_records(std::vector<EntityRecord>& records) {
  std::sort(records.begin(), records.end(),
            [](const EntityRecord& a, const EntityRecord& b) {
              return a.word.normalized < b.word.normalized;
            });
}

}  // namespace

EntityDatabase build_entity_db(const std::vector<EntityWord>& words,
                               TtsClient& tts, const AsrBackend& backend,
                               const std::vector<int>& layer_range,
                               const EntityBuildOptions& opts,
                               EntityBuildReport* report) {
  if (words.empty())
    throw Error(ErrorKind::kInput, "entity word list is empty");
  check_no_duplicates(words);

  BackendInfo info = backend.info();
  check_layers(layer_range, info);

  EntityDatabase db;
  db.layer_range = layer_range;
  db.model_id = info.model_id;
  db.hidden_dim = info.hidden_dim;
  db.frame_duration_s = info.frame_duration_s;
  db.records = encode_words(words, tts, backend, layer_range, opts, report);
  sort_records(db.records);
  return db;
}

EntityDatabase add_entity_words(const EntityDatabase& db,
                                const std::vector<EntityWord>& new_words,
                                TtsClient& tts, const AsrBackend& backend,
                                const EntityBuildOptions& opts,
                                EntityBuildReport* report) {
  if (new_words.empty())
    throw Error(ErrorKind::kInput, "no new entity words to add");
  check_no_duplicates(new_words);
  for (const auto& w : new_words) {
    if (db.find(w.normalized) != nullptr) {
      throw Error(ErrorKind::kInput,
                  "entity word already present: '" + w.surface + "'");
    }
  }

  BackendInfo info = backend.info();
  if (info.model_id != db.model_id || info.hidden_dim != db.hidden_dim ||
      info.frame_duration_s != db.frame_duration_s) {
    throw Error(ErrorKind::kCompatibility,
                "active backend does not match the database fingerprint (" +
                    info.model_id + " vs " + db.model_id + ")");
  }

  EntityDatabase out = db;
  auto added =
      encode_words(new_words, tts, backend, db.layer_range, opts, report);
  for (auto& rec : added) out.records.push_back(std::move(rec));
  sort_records(out.records);
  return out;
}

void save_entity_db(const EntityDatabase& db, const std::string& dir) {
  fs::create_directories(dir);
  const std::string blob_path = (fs::path(dir) / "tensors.bin").string();
  BlobWriter blobs(blob_path);

  json records = json::array();
  for (const auto& rec : db.records) {
    uint64_t offset = blobs.append(rec.hidden.data);
    records.push_back({{"surface", rec.word.surface},
                       {"normalized", rec.word.normalized},
                       {"language_hint", language_hint_name(rec.word.language_hint)},
                       {"source_audio_key", rec.source_audio_key},
                       {"frames", rec.hidden.frames},
                       {"offset", offset},
                       {"num_floats", rec.hidden.data.size()}});
  }
  blobs.close();

  json manifest = {{"format_version", 1},
                   {"model_id", db.model_id},
                   {"hidden_dim", db.hidden_dim},
                   {"frame_duration_s", db.frame_duration_s},
                   {"layers", db.layer_range},
                   {"record_count", db.records.size()},
                   {"records", records}};
  write_text_file((fs::path(dir) / "manifest.json").string(),
                  manifest.dump(2) + "\n");
}

EntityDatabase load_entity_db(const std::string& dir,
                              const std::optional<BackendInfo>& active_backend) {
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  json manifest;
  try {
    manifest = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInput,
                manifest_path + ": bad manifest: " + e.what());
  }

  EntityDatabase db;
  try {
    db.model_id = manifest.at("model_id").get<std::string>();
    db.hidden_dim = manifest.at("hidden_dim").get<int>();
    db.frame_duration_s = manifest.at("frame_duration_s").get<double>();
    db.layer_range = manifest.at("layers").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInput,
                manifest_path + ": bad manifest: " + e.what());
  }

  if (active_backend.has_value()) {
    // Refuse silently degraded matching.
    if (active_backend->model_id != db.model_id ||
        active_backend->hidden_dim != db.hidden_dim ||
        active_backend->frame_duration_s != db.frame_duration_s) {
      throw Error(ErrorKind::kCompatibility,
                  "entity database was built for model '" + db.model_id +
                      "' (dim " + std::to_string(db.hidden_dim) +
                      "); active backend is '" + active_backend->model_id +
                      "' (dim " + std::to_string(active_backend->hidden_dim) +
                      ")");
    }
  }

  BlobReader blobs((fs::path(dir) / "tensors.bin").string());
  size_t declared = manifest.at("record_count").get<size_t>();
  const auto& records = manifest.at("records");
  if (records.size() != declared) {
    throw Error(ErrorKind::kInput,
                manifest_path + ": record_count does not match records");
  }

  for (const auto& row : records) {
    EntityRecord rec;
    rec.word.surface = row.at("surface").get<std::string>();
    rec.word.normalized = row.at("normalized").get<std::string>();
    rec.word.language_hint =
        parse_language_hint(row.at("language_hint").get<std::string>());
    rec.source_audio_key = row.at("source_audio_key").get<std::string>();
    rec.hidden.layers = db.layer_range;
    rec.hidden.frames = row.at("frames").get<int>();
    rec.hidden.dims = db.hidden_dim;
    rec.hidden.frame_duration_s = db.frame_duration_s;
    size_t num_floats = row.at("num_floats").get<size_t>();
    size_t expected = db.layer_range.size() *
                      static_cast<size_t>(rec.hidden.frames) * db.hidden_dim;
    if (num_floats != expected) {
      throw Error(ErrorKind::kInput, manifest_path + ": tensor size mismatch for '" +
                                         rec.word.surface + "'");
    }
    rec.hidden.data = blobs.read(row.at("offset").get<uint64_t>(), num_floats);
    db.records.push_back(std::move(rec));
  }
  return db;
}

std::vector<EntityWord> read_words_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open words file: " + path);
  std::vector<EntityWord> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') continue;
    out.push_back(make_entity_word(line));
  }
  return out;
}

}  // namespace cbasr
