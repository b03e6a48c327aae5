#include <doctest.h>

#include <algorithm>
#include <set>

#include "cbasr/dataset_gen.hpp"
#include "cbasr/error.hpp"
#include "cbasr/mock_backend.hpp"
#include "cbasr/text.hpp"
#include "test_util.hpp"

using namespace cbasr;
using cbasr::testing::TempDir;
using cbasr::testing::throws_kind;

namespace {

// The two transcriptions and the surrounding word list from the synthetic
// dataset walkthrough.
const char* kTranscript1 = "银行业金融机构执行首套房贷款政策";
const char* kTranscript2 = "市场机制要起到资源配置的作用";

std::vector<std::string> table_dictionary() {
  return {"银行业", "金融机构", "执行",   "首套房", "贷款",   "政策",
          "市场机制", "要",     "起到",   "资源配置", "的",   "作用",
          "银行利息", "分支机构", "金融系", "市场营销", "加以控制"};
}

std::vector<CorpusUtterance> table_corpus() {
  return {{"t1", "", kTranscript1}, {"t2", "", kTranscript2}};
}

std::vector<VocabEntry> constructed_vocab(
    const std::vector<std::string>& words) {
  // Build through extract_vocab so both rank orders are consistent.
  std::vector<CorpusUtterance> corpus;
  for (size_t i = 0; i < words.size(); ++i) {
    corpus.push_back({"v" + std::to_string(i), "", words[i]});
  }
  GreedyDictSegmenter seg(words);
  return extract_vocab(corpus, seg, 2, 8, 0);
}

}  // namespace

TEST_CASE("greedy dictionary segmentation") {
  GreedyDictSegmenter seg(table_dictionary());
  auto words = seg.segment(kTranscript1);
  REQUIRE(words.size() == 6);
  CHECK(words[0] == "银行业");
  CHECK(words[1] == "金融机构");
  CHECK(words[5] == "政策");

  // Uncovered characters come out alone; Latin runs are single words.
  auto mixed = seg.segment("用MTDNN做贷款分析");
  CHECK(std::count(mixed.begin(), mixed.end(), "mtdnn") == 1);
  CHECK(std::count(mixed.begin(), mixed.end(), "贷款") == 1);
  CHECK(std::count(mixed.begin(), mixed.end(), "用") == 1);
}

TEST_CASE("vocabulary extraction") {
  GreedyDictSegmenter seg(table_dictionary());
  auto vocab = extract_vocab(table_corpus(), seg, 2, 8, 20000);

  std::set<std::string> words;
  for (const auto& e : vocab) words.insert(e.word);
  CHECK(words.count("银行业") == 1);
  CHECK(words.count("金融机构") == 1);
  CHECK(words.count("市场机制") == 1);
  CHECK(words.count("的") == 0);  // min_len filter

  SUBCASE("ranks are permutations of 0..V-1") {
    std::set<int> fwd, rev;
    for (const auto& e : vocab) {
      fwd.insert(e.forward_rank);
      rev.insert(e.reversed_rank);
    }
    CHECK(fwd.size() == vocab.size());
    CHECK(rev.size() == vocab.size());
    CHECK(*fwd.begin() == 0);
    CHECK(*fwd.rbegin() == static_cast<int>(vocab.size()) - 1);
    // Forward ranks agree with lexicographic order of the words.
    for (size_t i = 1; i < vocab.size(); ++i) {
      CHECK(vocab[i - 1].word < vocab[i].word);
    }
  }

  SUBCASE("frequency cap keeps the most frequent words") {
    std::vector<CorpusUtterance> corpus = table_corpus();
    for (int i = 0; i < 5; ++i) corpus.push_back({"r" + std::to_string(i), "", "贷款政策"});
    auto capped = extract_vocab(corpus, seg, 2, 8, 3);
    REQUIRE(capped.size() == 3);
    std::set<std::string> kept;
    for (const auto& e : capped) kept.insert(e.word);
    CHECK(kept.count("贷款") == 1);
    CHECK(kept.count("政策") == 1);
  }

  SUBCASE("training-vocabulary cap lands on exactly 20000 entries") {
    std::vector<std::string> dict;
    std::vector<CorpusUtterance> big;
    for (int i = 0; i < 21000; ++i) {
      std::string w = utf8_encode({static_cast<char32_t>(0x4E00 + i % 145),
                                   static_cast<char32_t>(0x4E00 + i / 145)});
      dict.push_back(w);
      big.push_back({"b" + std::to_string(i), "", w});
    }
    GreedyDictSegmenter big_seg(dict);
    auto capped = extract_vocab(big, big_seg, 2, 8, 20000);
    CHECK(capped.size() == 20000);
  }

  SUBCASE("one-word corpus") {
    std::vector<CorpusUtterance> tiny = {{"u0", "", "金融机构"}};
    auto single = extract_vocab(tiny, seg, 2, 8, 100);
    REQUIRE(single.size() == 1);
    CHECK(single[0].word == "金融机构");
    CHECK(single[0].forward_rank == 0);
    CHECK(single[0].reversed_rank == 0);
  }

  SUBCASE("empty corpus is an input error") {
    std::vector<CorpusUtterance> none;
    CHECK(throws_kind(ErrorKind::kInput,
                      [&] { extract_vocab(none, seg, 2, 8, 100); }));
  }
}

TEST_CASE("confusing negatives recover the published confusion pattern") {
  auto vocab = constructed_vocab({"金融机构", "金融系", "银行业", "银行利息",
                                  "分支机构", "市场机制"});
  auto negs = confusing_negatives("金融机构", vocab, 2, 8, kTranscript1);
  std::set<std::string> set(negs.begin(), negs.end());
  // Forward neighbors share the 金融 prefix; reversed neighbors the 机构
  // suffix.
  CHECK(set.count("金融系") == 1);
  CHECK(set.count("分支机构") == 1);
  // The positive itself and transcript words are excluded.
  CHECK(set.count("金融机构") == 0);
  CHECK(set.count("银行业") == 0);  // substring of the transcription

  SUBCASE("second pattern: 市场机制 draws 市场营销") {
    auto v2 = constructed_vocab({"金融机构", "金融系", "银行业", "银行利息",
                                 "分支机构", "市场机制", "市场营销",
                                 "加以控制"});
    auto n2 = confusing_negatives("市场机制", v2, 2, 8, kTranscript2);
    std::set<std::string> s2(n2.begin(), n2.end());
    CHECK(s2.count("市场营销") == 1);
    CHECK(s2.count("市场机制") == 0);
  }
}

TEST_CASE("confusing negatives edge cases") {
  auto vocab = constructed_vocab({"金融机构", "金融系", "银行业", "银行利息",
                                  "分支机构", "市场机制"});

  SUBCASE("rank 0 clamps without wraparound") {
    // 分支机构 sorts first in forward order.
    int rank0 = -1;
    std::string first_word;
    for (const auto& e : vocab) {
      if (e.forward_rank == 0) first_word = e.word;
    }
    (void)rank0;
    auto negs = confusing_negatives(first_word, vocab, 2, 20, "");
    // All picks are real vocabulary words other than the positive.
    for (const auto& w : negs) {
      CHECK(w != first_word);
      bool in_vocab = false;
      for (const auto& e : vocab) in_vocab |= e.word == w;
      CHECK(in_vocab);
    }
  }

  SUBCASE("vocabulary of size 1 yields empty, not an error") {
    auto tiny = constructed_vocab({"金融机构"});
    CHECK(confusing_negatives("金融机构", tiny, 5, 10, "").empty());
  }

  SUBCASE("positive outside the vocabulary is an input error") {
    CHECK(throws_kind(ErrorKind::kInput, [&] {
      confusing_negatives("不存在", vocab, 2, 4, "");
    }));
  }

  SUBCASE("k limits the result count") {
    auto negs = confusing_negatives("金融机构", vocab, 2, 2, "");
    CHECK(negs.size() <= 2);
  }
}

TEST_CASE("confusing negatives share a prefix or suffix when neighbors exist") {
  auto vocab = constructed_vocab({"金融机构", "金融系", "银行业", "银行利息",
                                  "分支机构", "市场机制", "市场营销",
                                  "加以控制"});
  for (const char* positive : {"金融机构", "市场机制", "银行业"}) {
    auto negs = confusing_negatives(positive, vocab, 1, 2, "");
    bool any_shared = false;
    auto pos_cps = utf8_decode(positive);
    for (const auto& w : negs) {
      auto cps = utf8_decode(w);
      if (cps.front() == pos_cps.front() || cps.back() == pos_cps.back()) {
        any_shared = true;
      }
    }
    //窗口 1 means the immediate lexicographic neighbors; on this
    // constructed vocabulary each positive has a same-prefix or
    // same-suffix neighbor.
    CHECK(any_shared);
  }
}

TEST_CASE("dataset generation on the mock stack") {
  GreedyDictSegmenter seg(table_dictionary());
  std::vector<CorpusUtterance> corpus = table_corpus();
  // Extra vocabulary so confusing/random negatives exist.
  std::vector<CorpusUtterance> vocab_corpus = corpus;
  for (const char* w : {"银行利息", "分支机构", "金融系", "市场营销",
                        "加以控制", "第二季", "吴卓羲", "犯罪现场"}) {
    vocab_corpus.push_back({std::string("extra_") + w, "", w});
  }
  auto vocab = extract_vocab(vocab_corpus, seg, 2, 8, 20000);

  MockTtsClient tts;
  MockBackend backend;
  SamplingConfig cfg;
  cfg.positives_per_utterance = 4;
  cfg.random_negatives = 2;
  cfg.confusing_negatives = 2;
  cfg.neighbor_window = 5;
  cfg.seed = 7;

  KwsDataset ds = build_kws_dataset(corpus, vocab, tts, backend,
                                    default_layer_range(), cfg);

  SUBCASE("positives are exactly the in-transcript words") {
    std::set<std::string> t1_pos, t2_pos;
    for (const auto& s : ds.samples) {
      if (!s.positive) continue;
      if (s.utterance_id == "t1") t1_pos.insert(s.word.normalized);
      if (s.utterance_id == "t2") t2_pos.insert(s.word.normalized);
    }
    CHECK(t1_pos.count("银行业") == 1);
    CHECK(t1_pos.count("金融机构") == 1);
    CHECK(t2_pos.count("市场机制") == 1);
  }

  SUBCASE("positive words are substrings, negatives are not") {
    for (const auto& s : ds.samples) {
      const std::string& transcript =
          s.utterance_id == "t1" ? kTranscript1 : kTranscript2;
      bool contained =
          std::string(transcript).find(s.word.normalized) != std::string::npos;
      CHECK(contained == s.positive);
    }
  }

  SUBCASE("maps have mock geometry") {
    for (const auto& s : ds.samples) {
      CHECK(s.map.channels == 12);
      CHECK(s.map.entity_frames >= 1);
      CHECK(s.map.utterance_frames >= 1);
    }
  }

  SUBCASE("manifest counts match the sample list") {
    size_t pos = 0, neg = 0;
    for (const auto& s : ds.samples) (s.positive ? pos : neg) += 1;
    CHECK(ds.manifest.at("positives").get<size_t>() == pos);
    CHECK(ds.manifest.at("random_negatives").get<size_t>() +
              ds.manifest.at("confusing_negatives").get<size_t>() ==
          neg);
    CHECK(ds.manifest.at("samples").get<size_t>() == ds.samples.size());
  }

  SUBCASE("generation is a pure function of corpus, vocab and seed") {
    KwsDataset again = build_kws_dataset(corpus, vocab, tts, backend,
                                         default_layer_range(), cfg);
    CHECK(again.manifest == ds.manifest);
    REQUIRE(again.samples.size() == ds.samples.size());
    for (size_t i = 0; i < ds.samples.size(); ++i) {
      CHECK(again.samples[i].word.normalized == ds.samples[i].word.normalized);
      CHECK(again.samples[i].positive == ds.samples[i].positive);
      CHECK(again.samples[i].map.data == ds.samples[i].map.data);
    }
  }

  SUBCASE("zero negative counts yield positives only") {
    SamplingConfig pos_only = cfg;
    pos_only.random_negatives = 0;
    pos_only.confusing_negatives = 0;
    KwsDataset only = build_kws_dataset(corpus, vocab, tts, backend,
                                        default_layer_range(), pos_only);
    for (const auto& s : only.samples) CHECK(s.positive);
    CHECK(only.manifest.at("random_negatives").get<size_t>() == 0);
    CHECK(only.manifest.at("confusing_negatives").get<size_t>() == 0);
  }

  SUBCASE("save/load round trip") {
    TempDir dir("kwsdata");
    save_kws_dataset(ds, dir.str());
    KwsDataset loaded = load_kws_dataset(dir.str());
    REQUIRE(loaded.samples.size() == ds.samples.size());
    for (size_t i = 0; i < ds.samples.size(); ++i) {
      CHECK(loaded.samples[i].map.data == ds.samples[i].map.data);
      CHECK(loaded.samples[i].positive == ds.samples[i].positive);
      CHECK(loaded.samples[i].utterance_id == ds.samples[i].utterance_id);
    }
    CHECK(loaded.manifest.at("samples").get<size_t>() == ds.samples.size());
  }
}

TEST_CASE("utterance with no positives contributes only negatives") {
  GreedyDictSegmenter seg(table_dictionary());
  auto vocab = extract_vocab(table_corpus(), seg, 2, 8, 20000);
  MockTtsClient tts;
  MockBackend backend;
  SamplingConfig cfg;
  cfg.random_negatives = 2;
  cfg.confusing_negatives = 1;
  cfg.seed = 3;

  std::vector<CorpusUtterance> corpus = {{"u0", "", "完全无关文本内容"}};
  KwsDataset ds =
      build_kws_dataset(corpus, vocab, tts, backend, default_layer_range(), cfg);
  CHECK(!ds.samples.empty());
  for (const auto& s : ds.samples) CHECK(!s.positive);
}

TEST_CASE("unreadable audio is recorded as a failed utterance") {
  GreedyDictSegmenter seg(table_dictionary());
  auto vocab = extract_vocab(table_corpus(), seg, 2, 8, 20000);
  MockTtsClient tts;
  MockBackend backend;
  SamplingConfig cfg;
  cfg.seed = 5;

  std::vector<CorpusUtterance> corpus = table_corpus();
  corpus.push_back({"broken", "/nonexistent/audio.wav", "市场机制"});
  KwsDataset ds =
      build_kws_dataset(corpus, vocab, tts, backend, default_layer_range(), cfg);
  CHECK(ds.manifest.at("failed_utterances").get<size_t>() == 1);
  for (const auto& s : ds.samples) CHECK(s.utterance_id != "broken");
}
