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

#ifndef CBASR_PIPELINE_HPP_
#define CBASR_PIPELINE_HPP_

#include <string>
#include <vector>

#include <json.hpp>

#include "cbasr/kws.hpp"
#include "cbasr/storage.hpp"
#include "cbasr/tts.hpp"

namespace cbasr {

enum class PromptStyle { kNone, kNaive, kSpokenForm };

const char* prompt_style_name(PromptStyle style);
PromptStyle parse_prompt_style(const std::string& name);

struct PromptSpec {
  PromptStyle style = PromptStyle::kNone;
  Language language = Language::kZh;  // zh or en
  std::vector<std::string> entities;  // ordered surface strings
};

// Exact template instantiation. Entities are deduplicated preserving
// order; style none or an empty entity list renders to the empty string
// (a no-prompt decode). The spoken form frames the list as disfluent
// presentation speech, which sits closer to the decoder's training
// context than a bare list.
std::string render_prompt(const PromptSpec& spec);

// UTF-8 byte length divided by the DEFLATE-compressed byte length; empty
// text is 0. Ratios above 2 signal degenerate repetition.
double compression_ratio(const std::string& text);

constexpr double kCompressionFallbackThreshold = 2.0;
constexpr size_t kMaxPromptEntities = 32;

struct TranscribeOptions {
  PromptStyle style = PromptStyle::kSpokenForm;
  Language language = Language::kZh;
  double threshold = kDefaultKwsThreshold;
  int beam = 5;
  size_t max_prompt_entities = kMaxPromptEntities;
  std::string tts_voice = "voice-zh";  // utterances synthesized in mock runs
};

struct BiasedResult {
  std::string utterance_id;
  std::string text;
  std::string prompt_used;
  std::vector<KwsDecision> detected;  // accepted decisions, logit descending
  bool fallback_triggered = false;
  double compression_ratio = 0.0;  // of the decode the fallback check saw
};

nlohmann::json biased_result_to_json(const BiasedResult& result);

// One utterance end to end: encode once, detect entities, render the
// prompt, decode with it, and re-decode without prompt (at most once) when
// the transcript's compression ratio exceeds 2.
BiasedResult transcribe(const AudioBuffer& audio, const EntityDatabase& db,
                        const KwsClassifier& classifier,
                        const AsrBackend& backend,
                        const TranscribeOptions& opts);

struct CorpusRunFailure {
  std::string utterance_id;
  std::string message;
};

struct CorpusRunResult {
  std::vector<BiasedResult> results;  // corpus order; failed utterances absent
  std::vector<CorpusRunFailure> failures;
  nlohmann::json manifest;
};

// Per-utterance independence; failures are recorded and the run continues.
CorpusRunResult transcribe_corpus(const std::vector<CorpusUtterance>& corpus,
                                  const EntityDatabase& db,
                                  const KwsClassifier& classifier,
                                  const AsrBackend& backend, TtsClient& tts,
                                  const TranscribeOptions& opts,
                                  int parallelism = 4);

}  // namespace cbasr

#endif  // CBASR_PIPELINE_HPP_
