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

#include "cbasr/dataset_gen.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "cbasr/error.hpp"
#include "cbasr/hash.hpp"
#include "cbasr/parallel.hpp"
#include "cbasr/text.hpp"

namespace fs = std::filesystem;

namespace cbasr {

using nlohmann::json;

struct GreedyDictSegmenter::Impl {
  std::unordered_set<std::string> words;
  size_t max_cps = 1;
};

GreedyDictSegmenter::GreedyDictSegmenter(
    const std::vector<std::string>& dictionary)
    : impl_(std::make_shared<Impl>()) {
  for (const auto& raw : dictionary) {
    std::string word = normalize_entity(raw);
    if (word.empty()) continue;
    impl_->max_cps = std::max(impl_->max_cps, utf8_decode(word).size());
    impl_->words.insert(std::move(word));
  }
}

std::vector<std::string> GreedyDictSegmenter::segment(
    const std::string& text) const {
  std::vector<char32_t> cps = utf8_decode(normalize_entity(text));
  std::vector<std::string> out;
  size_t i = 0;
  while (i < cps.size()) {
    char32_t cp = cps[i];
    if (is_latin_letter(cp) || is_ascii_digit(cp)) {
      size_t j = i;
      while (j < cps.size() &&
             (is_latin_letter(cps[j]) || is_ascii_digit(cps[j]))) {
        ++j;
      }
      out.push_back(
          utf8_encode(std::vector<char32_t>(cps.begin() + i, cps.begin() + j)));
      i = j;
      continue;
    }
    if (is_han(cp)) {
      size_t best = 1;
      size_t limit = std::min(impl_->max_cps, cps.size() - i);
      for (size_t len = limit; len >= 2; --len) {
        std::string candidate = utf8_encode(
            std::vector<char32_t>(cps.begin() + i, cps.begin() + i + len));
        if (impl_->words.count(candidate)) {
          best = len;
          break;
        }
      }
      out.push_back(utf8_encode(
          std::vector<char32_t>(cps.begin() + i, cps.begin() + i + best)));
      i += best;
      continue;
    }
    ++i;  // separators, punctuation
  }
  return out;
}

std::vector<VocabEntry> extract_vocab(
    const std::vector<CorpusUtterance>& corpus, const Segmenter& segmenter,
    int min_len, int max_len, size_t cap) {
  if (corpus.empty()) throw Error(ErrorKind::kInput, "empty corpus");
  if (min_len < 1 || max_len < min_len) {
    throw Error(ErrorKind::kInput, "bad vocabulary length bounds");
  }

  std::map<std::string, int> freq;
  for (const auto& utt : corpus) {
    for (const auto& word : segmenter.segment(utt.transcript)) {
      int len = static_cast<int>(utf8_decode(word).size());
      if (len < min_len || len > max_len) continue;
      ++freq[word];
    }
  }
  if (freq.empty()) {
    throw Error(ErrorKind::kInput,
                "no vocabulary words within the length bounds");
  }

  std::vector<std::pair<std::string, int>> ordered(freq.begin(), freq.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (cap > 0 && ordered.size() > cap) ordered.resize(cap);

  std::vector<VocabEntry> vocab(ordered.size());
  for (size_t i = 0; i < ordered.size(); ++i) {
    vocab[i].word = ordered[i].first;
    vocab[i].frequency = ordered[i].second;
  }

  std::vector<size_t> idx(vocab.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return vocab[a].word < vocab[b].word;
  });
  for (size_t rank = 0; rank < idx.size(); ++rank) {
    vocab[idx[rank]].forward_rank = static_cast<int>(rank);
  }

  std::vector<std::string> reversed(vocab.size());
  for (size_t i = 0; i < vocab.size(); ++i) {
    reversed[i] = reverse_codepoints(vocab[i].word);
  }
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return reversed[a] < reversed[b];
  });
  for (size_t rank = 0; rank < idx.size(); ++rank) {
    vocab[idx[rank]].reversed_rank = static_cast<int>(rank);
  }

  std::sort(vocab.begin(), vocab.end(), [](const auto& a, const auto& b) {
    return a.forward_rank < b.forward_rank;
  });
  return vocab;
}

std::vector<std::string> confusing_negatives(
    const std::string& positive, const std::vector<VocabEntry>& vocab,
    int window, int k, const std::string& transcript) {
  if (window < 1) throw Error(ErrorKind::kInput, "neighbor window must be >= 1");
  const VocabEntry* pos_entry = nullptr;
  for (const auto& e : vocab) {
    if (e.word == positive) {
      pos_entry = &e;
      break;
    }
  }
  if (pos_entry == nullptr) {
    throw Error(ErrorKind::kInput,
                "positive word is not in the vocabulary: " + positive);
  }
  if (k <= 0 || vocab.size() < 2) return {};

  std::vector<const VocabEntry*> by_forward(vocab.size());
  std::vector<const VocabEntry*> by_reversed(vocab.size());
  for (const auto& e : vocab) {
    by_forward[e.forward_rank] = &e;
    by_reversed[e.reversed_rank] = &e;
  }
  const std::string norm_transcript = normalize_entity(transcript);

  auto common_prefix_cps = [](const std::string& a, const std::string& b) {
    auto ca = utf8_decode(a), cb = utf8_decode(b);
    size_t n = std::min(ca.size(), cb.size());
    size_t shared = 0;
    while (shared < n && ca[shared] == cb[shared]) ++shared;
    return shared;
  };

  // Windows clamp at the edges, no wraparound. Within the window, the
  // neighbors overlapping the positive the most come first: that overlap
  // is what makes the word confusable.
  auto gather = [&](const std::vector<const VocabEntry*>& order, int center,
                    const std::string& key, bool reverse_words) {
    struct Candidate {
      std::string word;
      size_t shared;
      int dist;
    };
    std::vector<Candidate> picks;
    for (int dist = 1; dist <= window; ++dist) {
      for (int sign : {-1, 1}) {
        int rank = center + sign * dist;
        if (rank < 0 || rank >= static_cast<int>(order.size())) continue;
        const std::string& w = order[rank]->word;
        if (w == positive) continue;
        if (!norm_transcript.empty() &&
            norm_transcript.find(w) != std::string::npos) {
          continue;
        }
        std::string cmp = reverse_words ? reverse_codepoints(w) : w;
        picks.push_back({w, common_prefix_cps(cmp, key), dist});
      }
    }
    std::sort(picks.begin(), picks.end(),
              [](const Candidate& a, const Candidate& b) {
                if (a.shared != b.shared) return a.shared > b.shared;
                if (a.dist != b.dist) return a.dist < b.dist;
                return a.word < b.word;
              });
    std::vector<std::string> out;
    out.reserve(picks.size());
    for (auto& c : picks) out.push_back(std::move(c.word));
    return out;
  };

  std::vector<std::string> forward =
      gather(by_forward, pos_entry->forward_rank, positive, false);
  std::vector<std::string> reversed =
      gather(by_reversed, pos_entry->reversed_rank,
             reverse_codepoints(positive), true);

  // Interleave the two orders, closest neighbors first.
  std::vector<std::string> out;
  std::set<std::string> seen;
  size_t fi = 0, ri = 0;
  while (out.size() < static_cast<size_t>(k) &&
         (fi < forward.size() || ri < reversed.size())) {
    if (fi < forward.size() && seen.insert(forward[fi]).second) {
      out.push_back(forward[fi]);
    }
    if (fi < forward.size()) ++fi;
    if (out.size() >= static_cast<size_t>(k)) break;
    if (ri < reversed.size() && seen.insert(reversed[ri]).second) {
      out.push_back(reversed[ri]);
    }
    if (ri < reversed.size()) ++ri;
  }
  return out;
}

namespace {

struct PlannedUtterance {
  std::vector<std::string> positives;
  std::vector<std::string> random_negatives;
  std::vector<std::string> confusing;  // negatives
};

PlannedUtterance plan_utterance(const CorpusUtterance& utt,
                                const std::vector<VocabEntry>& vocab,
                                const SamplingConfig& cfg) {
  PlannedUtterance plan;
  const std::string transcript = normalize_entity(utt.transcript);

  // Positives: vocabulary words occurring as substrings, nearest-to-front
  // and longest first.
  struct Hit {
    size_t pos;
    size_t len;
    const std::string* word;
  };
  std::vector<Hit> hits;
  for (const auto& e : vocab) {
    size_t at = transcript.find(e.word);
    if (at != std::string::npos) {
      hits.push_back({at, utf8_decode(e.word).size(), &e.word});
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.pos != b.pos) return a.pos < b.pos;
    if (a.len != b.len) return a.len > b.len;
    return *a.word < *b.word;
  });
  for (const auto& h : hits) {
    if (static_cast<int>(plan.positives.size()) >= cfg.positives_per_utterance)
      break;
    plan.positives.push_back(*h.word);
  }

  // Random negatives, drawn per utterance from a stable stream.
  std::mt19937_64 rng(derive_seed(cfg.seed, "sample:" + utt.utterance_id));
  std::set<std::string> chosen;
  int attempts = 0;
  const int max_attempts = cfg.random_negatives * 64 + 64;
  while (static_cast<int>(plan.random_negatives.size()) <
             cfg.random_negatives &&
         attempts++ < max_attempts) {
    const auto& candidate = vocab[rng() % vocab.size()].word;
    if (transcript.find(candidate) != std::string::npos) continue;
    if (!chosen.insert(candidate).second) continue;
    plan.random_negatives.push_back(candidate);
  }

  for (const auto& pos : plan.positives) {
    for (auto& w : confusing_negatives(pos, vocab, cfg.neighbor_window,
                                       cfg.confusing_negatives, transcript)) {
      if (chosen.insert(w).second) plan.confusing.push_back(std::move(w));
    }
  }
  return plan;
}

}  // namespace

KwsDataset build_kws_dataset(const std::vector<CorpusUtterance>& corpus,
                             const std::vector<VocabEntry>& vocab,
                             TtsClient& tts, const AsrBackend& backend,
                             const std::vector<int>& layer_range,
                             const SamplingConfig& cfg) {
  if (corpus.empty()) throw Error(ErrorKind::kInput, "empty corpus");
  if (vocab.empty()) throw Error(ErrorKind::kInput, "empty vocabulary");

  // Pass 1: decide every (word, utterance, label) pair. Depends only on
  // (corpus, vocab, cfg.seed).
  std::vector<PlannedUtterance> plans(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    plans[i] = plan_utterance(corpus[i], vocab, cfg);
  }

  // Pass 2: synthesize + encode each distinct word once, in parallel.
  std::set<std::string> needed;
  for (const auto& plan : plans) {
    needed.insert(plan.positives.begin(), plan.positives.end());
    needed.insert(plan.random_negatives.begin(), plan.random_negatives.end());
    needed.insert(plan.confusing.begin(), plan.confusing.end());
  }
  std::vector<std::string> needed_words(needed.begin(), needed.end());
  std::unordered_map<std::string, LayerStack> word_stacks;
  word_stacks.reserve(needed_words.size());
  {
    std::vector<LayerStack> stacks(needed_words.size());
    std::vector<std::string> errors(needed_words.size());
    parallel_for_indexed(needed_words.size(), cfg.parallelism, [&](size_t i) {
      try {
        AudioBuffer audio = tts.synthesize({needed_words[i], "voice-zh", 1.0});
        stacks[i] = backend.encode(audio, layer_range);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    for (size_t i = 0; i < needed_words.size(); ++i) {
      if (!errors[i].empty()) {
        throw Error(ErrorKind::kService, "failed to synthesize vocabulary "
                                         "word '" +
                                             needed_words[i] +
                                             "': " + errors[i]);
      }
      word_stacks[needed_words[i]] = std::move(stacks[i]);
    }
  }

  // Pass 3: encode utterances and compute maps, sharded across workers.
  std::vector<std::vector<KwsSample>> per_utt(corpus.size());
  std::vector<std::string> utt_errors(corpus.size());
  parallel_for_indexed(corpus.size(), cfg.parallelism, [&](size_t i) {
    try {
      AudioBuffer audio = utterance_audio(corpus[i], tts, "voice-zh");
      LayerStack utt_stack = backend.encode(audio, layer_range);
      auto add = [&](const std::string& word, bool positive) {
        KwsSample s;
        s.word.surface = word;
        s.word.normalized = word;
        s.word.language_hint = detect_language_hint(word);
        s.positive = positive;
        s.utterance_id = corpus[i].utterance_id;
        s.map = similarity_map(word_stacks.at(word), utt_stack);
        per_utt[i].push_back(std::move(s));
      };
      for (const auto& w : plans[i].positives) add(w, true);
      for (const auto& w : plans[i].random_negatives) add(w, false);
      for (const auto& w : plans[i].confusing) add(w, false);
    } catch (const std::exception& e) {
      utt_errors[i] = e.what();
    }
  });

  KwsDataset out;
  size_t n_pos = 0, n_rand = 0, n_conf = 0, failed = 0;
  json failures = json::array();
  for (size_t i = 0; i < corpus.size(); ++i) {
    if (!utt_errors[i].empty()) {
      ++failed;
      failures.push_back({{"utterance_id", corpus[i].utterance_id},
                          {"error", utt_errors[i]}});
      continue;
    }
    n_pos += plans[i].positives.size();
    n_rand += plans[i].random_negatives.size();
    n_conf += plans[i].confusing.size();
    for (auto& s : per_utt[i]) out.samples.push_back(std::move(s));
  }

  out.manifest = {
      {"utterances", corpus.size()},
      {"failed_utterances", failed},
      {"failures", failures},
      {"vocab_size", vocab.size()},
      {"positives", n_pos},
      {"random_negatives", n_rand},
      {"confusing_negatives", n_conf},
      {"samples", out.samples.size()},
      {"config",
       {{"positives_per_utterance", cfg.positives_per_utterance},
        {"random_negatives", cfg.random_negatives},
        {"confusing_negatives", cfg.confusing_negatives},
        {"neighbor_window", cfg.neighbor_window},
        {"seed", cfg.seed}}},
      {"layers", layer_range}};
  return out;
}

void save_kws_dataset(const KwsDataset& dataset, const std::string& dir) {
  fs::create_directories(dir);
  BlobWriter blobs((fs::path(dir) / "tensors.bin").string());
  std::vector<json> rows;
  rows.reserve(dataset.samples.size() + 1);
  json header = dataset.manifest;
  header["type"] = "header";
  rows.push_back(header);
  for (const auto& s : dataset.samples) {
    uint64_t offset = blobs.append(s.map.data);
    rows.push_back({{"utterance_id", s.utterance_id},
                    {"word", s.word.surface},
                    {"label", s.positive ? "positive" : "negative"},
                    {"channels", s.map.channels},
                    {"entity_frames", s.map.entity_frames},
                    {"utterance_frames", s.map.utterance_frames},
                    {"offset", offset},
                    {"num_floats", s.map.data.size()}});
  }
  blobs.close();
  write_jsonl((fs::path(dir) / "samples.jsonl").string(), rows);
}

KwsDataset load_kws_dataset(const std::string& dir) {
  auto rows = read_jsonl((fs::path(dir) / "samples.jsonl").string());
  if (rows.empty() || rows[0].value("type", "") != "header") {
    throw Error(ErrorKind::kInput,
                dir + ": samples.jsonl is missing its header row");
  }
  BlobReader blobs((fs::path(dir) / "tensors.bin").string());

  KwsDataset out;
  out.manifest = rows[0];
  out.manifest.erase("type");
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    KwsSample s;
    try {
      s.utterance_id = row.at("utterance_id").get<std::string>();
      s.word = make_entity_word(row.at("word").get<std::string>());
      s.positive = row.at("label").get<std::string>() == "positive";
      s.map.channels = row.at("channels").get<int>();
      s.map.entity_frames = row.at("entity_frames").get<int>();
      s.map.utterance_frames = row.at("utterance_frames").get<int>();
      s.map.data = blobs.read(row.at("offset").get<uint64_t>(),
                              row.at("num_floats").get<size_t>());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kInput,
                  dir + ": bad sample row " + std::to_string(i) + ": " +
                      e.what());
    }
    size_t expected = static_cast<size_t>(s.map.channels) *
                      s.map.entity_frames * s.map.utterance_frames;
    if (s.map.data.size() != expected) {
      throw Error(ErrorKind::kInput,
                  dir + ": tensor shape mismatch in row " + std::to_string(i));
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace cbasr
