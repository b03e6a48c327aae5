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

#include "cbasr/pipeline.hpp"

#include <algorithm>
#include <cstring>
#include <set>

#include <zlib.h>

#include "cbasr/error.hpp"
#include "cbasr/parallel.hpp"

namespace cbasr {

using nlohmann::json;

const char* prompt_style_name(PromptStyle style) {
  switch (style) {
    case PromptStyle::kNone: return "none";
    case PromptStyle::kNaive: return "naive";
    case PromptStyle::kSpokenForm: return "spoken_form";
  }
  return "none";
}

PromptStyle parse_prompt_style(const std::string& name) {
  if (name == "none") return PromptStyle::kNone;
  if (name == "naive") return PromptStyle::kNaive;
  if (name == "spoken_form") return PromptStyle::kSpokenForm;
  throw Error(ErrorKind::kConfig, "unknown prompt style: " + name);
}

namespace {

std::string join(const std::vector<std::string>& items,
                 const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

std::string render_prompt(const PromptSpec& spec) {
  if (spec.style == PromptStyle::kNone) return "";

  std::vector<std::string> entities;
  std::set<std::string> seen;
  for (const auto& e : spec.entities) {
    if (seen.insert(e).second) entities.push_back(e);
  }
  if (entities.empty()) return "";

  bool zh = false;
  switch (spec.language) {
    case Language::kZh: zh = true; break;
    case Language::kEn: zh = false; break;
    case Language::kAuto:
      throw Error(ErrorKind::kConfig,
                  "prompt rendering needs a concrete language (zh or en)");
  }

  const std::string list = join(entities, zh ? "、" : ", ");
  switch (spec.style) {
    case PromptStyle::kNaive:
      return list;
    case PromptStyle::kSpokenForm:
      if (zh) {
        return "今天演讲的主题是这个呃，" + list + "。好，那我就继续讲。";
      }
      return "The topic of today’s speech is, ah, " + list +
             ". Okay, then I’ll continue.";
    case PromptStyle::kNone:
      break;
  }
  return "";
}

double compression_ratio(const std::string& text) {
  if (text.empty()) return 0.0;

  z_stream zs;
  std::memset(&zs, 0, sizeof(zs));
  // Raw DEFLATE stream, no zlib header.
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -15, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorKind::kInternal, "deflateInit2 failed");
  }
  std::vector<unsigned char> out(deflateBound(&zs, text.size()));
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(text.data()));
  zs.avail_in = static_cast<uInt>(text.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = deflate(&zs, Z_FINISH);
  size_t compressed = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) {
    throw Error(ErrorKind::kInternal, "deflate failed");
  }
  return static_cast<double>(text.size()) / static_cast<double>(compressed);
}

json biased_result_to_json(const BiasedResult& result) {
  json detected = json::array();
  for (const auto& d : result.detected) {
    detected.push_back({{"word", d.word.surface}, {"logit", d.logit}});
  }
  return json{{"utterance_id", result.utterance_id},
              {"text", result.text},
              {"prompt_used", result.prompt_used},
              {"detected", detected},
              {"fallback_triggered", result.fallback_triggered},
              {"compression_ratio", result.compression_ratio}};
}

BiasedResult transcribe(const AudioBuffer& audio, const EntityDatabase& db,
                        const KwsClassifier& classifier,
                        const AsrBackend& backend,
                        const TranscribeOptions& opts) {
  BiasedResult out;

  DecodeParams params;
  params.beam_size = opts.beam;
  params.language = opts.language;

  std::string prompt;
  if (opts.style != PromptStyle::kNone && !db.records.empty()) {
    LayerStack hidden;
    try {
      hidden = backend.encode(audio, db.layer_range);
    } catch (const Error& e) {
      throw e.with_stage("encode");
    }
    std::vector<KwsDecision> decisions;
    try {
      decisions = detect(db, hidden, classifier, opts.threshold);
    } catch (const Error& e) {
      throw e.with_stage("detect");
    }
    for (auto& d : decisions) {
      if (d.accepted) out.detected.push_back(d);
    }

    PromptSpec spec;
    spec.style = opts.style;
    spec.language = opts.language;
    for (const auto& d : out.detected) {
      if (spec.entities.size() >= opts.max_prompt_entities) break;
      spec.entities.push_back(d.word.surface);
    }
    prompt = render_prompt(spec);
  }

  if (!prompt.empty()) params.prompt = prompt;
  out.prompt_used = prompt;

  Transcript first;
  try {
    first = backend.decode(audio, params);
  } catch (const Error& e) {
    throw e.with_stage("decode");
  }
  out.text = first.text;
  out.compression_ratio = compression_ratio(first.text);

  // Prompts occasionally push the decoder into repetition loops; one
  // prompt-free re-decode recovers, and only one.
  if (!prompt.empty() &&
      out.compression_ratio > kCompressionFallbackThreshold) {
    DecodeParams plain = params;
    plain.prompt.reset();
    try {
      out.text = backend.decode(audio, plain).text;
    } catch (const Error& e) {
      throw e.with_stage("decode-fallback");
    }
    out.fallback_triggered = true;
  }
  return out;
}

CorpusRunResult transcribe_corpus(const std::vector<CorpusUtterance>& corpus,
                                  const EntityDatabase& db,
                                  const KwsClassifier& classifier,
                                  const AsrBackend& backend, TtsClient& tts,
                                  const TranscribeOptions& opts,
                                  int parallelism) {
  std::vector<std::optional<BiasedResult>> slots(corpus.size());
  std::vector<std::string> errors(corpus.size());

  parallel_for_indexed(corpus.size(), parallelism, [&](size_t i) {
    try {
      AudioBuffer audio = utterance_audio(corpus[i], tts, opts.tts_voice);
      BiasedResult r = transcribe(audio, db, classifier, backend, opts);
      r.utterance_id = corpus[i].utterance_id;
      slots[i] = std::move(r);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  CorpusRunResult out;
  json fallback_flags = json::array();
  for (size_t i = 0; i < corpus.size(); ++i) {
    if (slots[i].has_value()) {
      fallback_flags.push_back({{"utterance_id", corpus[i].utterance_id},
                                {"fallback", slots[i]->fallback_triggered}});
      out.results.push_back(std::move(*slots[i]));
    } else {
      out.failures.push_back({corpus[i].utterance_id, errors[i]});
    }
  }

  json failure_rows = json::array();
  for (const auto& f : out.failures) {
    failure_rows.push_back(
        {{"utterance_id", f.utterance_id}, {"error", f.message}});
  }
  BackendInfo info = backend.info();
  out.manifest = {
      {"utterances", corpus.size()},
      {"transcribed", out.results.size()},
      {"failures", failure_rows},
      {"fallbacks", fallback_flags},
      {"options",
       {{"prompt_style", prompt_style_name(opts.style)},
        {"language", language_name(opts.language)},
        {"threshold", opts.threshold},
        {"beam", opts.beam},
        {"max_prompt_entities", opts.max_prompt_entities}}},
      {"backend",
       {{"model_id", info.model_id},
        {"hidden_dim", info.hidden_dim},
        {"frame_duration_s", info.frame_duration_s}}},
      {"entity_db",
       {{"model_id", db.model_id},
        {"records", db.records.size()},
        {"layers", db.layer_range}}},
      {"classifier",
       {{"architecture", kws_architecture_name(classifier.config().architecture)},
        {"channels", classifier.channels()}}}};
  return out;
}

}  // namespace cbasr
