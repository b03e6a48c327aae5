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

#ifndef CBASR_DATASET_GEN_HPP_
#define CBASR_DATASET_GEN_HPP_

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbasr/kws.hpp"
#include "cbasr/storage.hpp"
#include "cbasr/tts.hpp"

namespace cbasr {

struct VocabEntry {
  std::string word;       // normalized form
  int frequency = 0;
  int forward_rank = 0;   // position in lexicographic order
  int reversed_rank = 0;  // position in lexicographic order of the
                          // character-reversed word
};

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::vector<std::string> segment(const std::string& text) const = 0;
};

// Greedy longest-match over Han runs against a dictionary; characters not
// covered by any entry come out as single characters. Latin words and
// digit strings are tokens of their own.
class GreedyDictSegmenter : public Segmenter {
 public:
  explicit GreedyDictSegmenter(const std::vector<std::string>& dictionary);
  std::vector<std::string> segment(const std::string& text) const override;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

// Deduplicated vocabulary capped by frequency, with both rank orders
// computed. Words are length-filtered in codepoints.
std::vector<VocabEntry> extract_vocab(
    const std::vector<CorpusUtterance>& corpus, const Segmenter& segmenter,
    int min_len = 2, int max_len = 8, size_t cap = 20000);

// Up to k vocabulary words drawn from the forward-rank window and the
// reversed-rank window around the positive, nearest first, excluding the
// positive itself and anything contained in the source transcription.
// Forward picks tend to share prefixes, reversed picks suffixes.
std::vector<std::string> confusing_negatives(
    const std::string& positive, const std::vector<VocabEntry>& vocab,
    int window, int k, const std::string& transcript = "");

struct SamplingConfig {
  int positives_per_utterance = 4;
  int random_negatives = 2;     // per utterance
  int confusing_negatives = 3;  // per positive word
  int neighbor_window = 5;      // per direction, per rank order
  uint64_t seed = 0;
  int parallelism = 4;
};

struct KwsDataset {
  std::vector<KwsSample> samples;
  nlohmann::json manifest;
};

// Builds the synthetic KWS corpus: positives are vocabulary words occurring
// as substrings of the (normalized) transcription; negatives are random
// plus lexicographic confusing words; every map comes from
// kws::similarity_map over the mock or real stack. Pure function of
// (corpus, vocab, cfg.seed).
KwsDataset build_kws_dataset(const std::vector<CorpusUtterance>& corpus,
                             const std::vector<VocabEntry>& vocab,
                             TtsClient& tts, const AsrBackend& backend,
                             const std::vector<int>& layer_range,
                             const SamplingConfig& cfg);

// Directory layout: samples.jsonl (header row with counts/seed, then one
// row per sample) + tensors.bin in the entity-db blob format.
void save_kws_dataset(const KwsDataset& dataset, const std::string& dir);
KwsDataset load_kws_dataset(const std::string& dir);

}  // namespace cbasr

#endif  // CBASR_DATASET_GEN_HPP_
