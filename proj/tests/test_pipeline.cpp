#include <doctest.h>

#include <map>

#include "cbasr/error.hpp"
#include "cbasr/mock_backend.hpp"
#include "cbasr/pipeline.hpp"
#include "mock_data.hpp"
#include "test_util.hpp"

using namespace cbasr;
using cbasr::testing::throws_kind;

namespace {

// One classifier shared across the pipeline tests; training it once keeps
// the suite fast.
const KwsClassifier& shared_classifier() {
  static KwsClassifier clf = [] {
    ClassifierConfig cfg = cbasr::testing::desk_classifier_config(2024);
    cfg.epochs = 6;
    return KwsClassifier::train(cbasr::testing::make_mock_samples(500, 404),
                                cfg);
  }();
  return clf;
}

EntityDatabase table_db(const AsrBackend& backend,
                        const std::vector<std::string>& surfaces) {
  MockTtsClient tts;
  std::vector<EntityWord> words;
  for (const auto& s : surfaces) words.push_back(make_entity_word(s));
  return build_entity_db(words, tts, backend, default_layer_range());
}

TranscribeOptions desk_options(PromptStyle style) {
  TranscribeOptions opts;
  opts.style = style;
  opts.language = Language::kZh;
  opts.threshold = 0.0;  // desk-scale operating point
  opts.beam = 5;
  return opts;
}

}  // namespace

TEST_CASE("prompt rendering follows the templates") {
  CHECK(render_prompt({PromptStyle::kNaive, Language::kEn,
                       {"entity 1", "entity 2", "entity 3"}}) ==
        "entity 1, entity 2, entity 3");
  CHECK(render_prompt({PromptStyle::kNaive, Language::kZh,
                       {"实体1", "实体2", "实体3"}}) == "实体1、实体2、实体3");
  CHECK(render_prompt({PromptStyle::kSpokenForm, Language::kZh,
                       {"甲", "乙"}}) ==
        "今天演讲的主题是这个呃，甲、乙。好，那我就继续讲。");
  CHECK(render_prompt({PromptStyle::kSpokenForm, Language::kEn,
                       {"entity 1", "entity 2", "entity 3"}}) ==
        "The topic of today’s speech is, ah, entity 1, entity 2, "
        "entity 3. Okay, then I’ll continue.");

  SUBCASE("empty entity list renders the empty prompt") {
    CHECK(render_prompt({PromptStyle::kSpokenForm, Language::kEn, {}}) == "");
    CHECK(render_prompt({PromptStyle::kNaive, Language::kZh, {}}) == "");
  }
  SUBCASE("style none is always empty") {
    CHECK(render_prompt({PromptStyle::kNone, Language::kZh, {"甲"}}) == "");
  }
  SUBCASE("entities deduplicate preserving order") {
    CHECK(render_prompt({PromptStyle::kNaive, Language::kEn,
                         {"b", "a", "b", "a"}}) == "b, a");
  }
  SUBCASE("language auto is a config error") {
    CHECK(throws_kind(ErrorKind::kConfig, [] {
      render_prompt({PromptStyle::kNaive, Language::kAuto, {"a"}});
    }));
  }
  SUBCASE("style parsing") {
    CHECK(parse_prompt_style("spoken_form") == PromptStyle::kSpokenForm);
    CHECK(prompt_style_name(PromptStyle::kNaive) == std::string("naive"));
    CHECK(throws_kind(ErrorKind::kConfig, [] { parse_prompt_style("x"); }));
  }
}

TEST_CASE("compression ratio fixtures") {
  CHECK(compression_ratio("") == 0.0);

  std::string repetitive;
  for (int i = 0; i < 500; ++i) repetitive += "ab";
  CHECK(compression_ratio(repetitive) > 2.0);
  CHECK(compression_ratio(repetitive) == doctest::Approx(83.33).epsilon(0.01));

  const std::string natural =
      "the quick brown fox jumps over the lazy dog while twelve wizards mix "
      "bright potions in the old stone tower";
  CHECK(compression_ratio(natural) <= 2.0);
  CHECK(compression_ratio(natural) == doctest::Approx(1.3086).epsilon(0.001));

  // Natural Chinese stays below the fallback threshold too.
  CHECK(compression_ratio("国务院发展研究中心市场经济研究所副所长邓郁松认为") <
        2.0);
}

TEST_CASE("transcribe rescues a confusable entity via the prompt") {
  MockBackend backend(std::map<char32_t, char32_t>{{U'郁', U'玉'}});
  EntityDatabase db = table_db(backend, {"邓郁松", "市场机制", "金融机构"});
  const KwsClassifier& clf = shared_classifier();
  AudioBuffer audio = mock_tts("记者邓郁松日前");

  BiasedResult plain =
      transcribe(audio, db, clf, backend, desk_options(PromptStyle::kNone));
  CHECK(plain.text == "记者邓玉松日前");
  CHECK(plain.prompt_used.empty());
  CHECK(!plain.fallback_triggered);

  BiasedResult biased =
      transcribe(audio, db, clf, backend, desk_options(PromptStyle::kNaive));
  bool found = false;
  for (const auto& d : biased.detected) {
    if (d.word.surface == "邓郁松") found = true;
  }
  CHECK(found);
  CHECK(biased.text == "记者邓郁松日前");
  CHECK(biased.prompt_used.find("邓郁松") != std::string::npos);

  SUBCASE("detected decisions come in descending logit order") {
    for (size_t i = 1; i < biased.detected.size(); ++i) {
      CHECK(biased.detected[i - 1].logit >= biased.detected[i].logit);
    }
  }

  SUBCASE("result serializes with the published fields") {
    auto j = biased_result_to_json(biased);
    CHECK(j.contains("text"));
    CHECK(j.contains("prompt_used"));
    CHECK(j.contains("detected"));
    CHECK(j.contains("fallback_triggered"));
    CHECK(j.contains("compression_ratio"));
  }
}

TEST_CASE("style none matches a direct backend decode bit for bit") {
  MockBackend inner(std::map<char32_t, char32_t>{{U'郁', U'玉'}});
  CountingBackend backend(inner);
  EntityDatabase db = table_db(inner, {"邓郁松"});
  AudioBuffer audio = mock_tts("记者邓郁松日前");

  BiasedResult r = transcribe(audio, db, shared_classifier(), backend,
                              desk_options(PromptStyle::kNone));
  DecodeParams params;
  params.beam_size = 5;
  params.language = Language::kZh;
  CHECK(r.text == inner.decode(audio, params).text);
  CHECK(backend.encode_calls() == 0);  // nothing to detect without a prompt
  CHECK(backend.decode_calls() == 1);
}

TEST_CASE("transcribe encodes exactly once per utterance") {
  MockBackend inner;
  CountingBackend backend(inner);
  EntityDatabase db = table_db(inner, {"市场机制", "金融机构", "银行利息"});
  AudioBuffer audio = mock_tts("市场机制要起到作用");

  transcribe(audio, db, shared_classifier(), backend,
             desk_options(PromptStyle::kNaive));
  CHECK(backend.encode_calls() == 1);
  CHECK(backend.decode_calls() == 1);
}

TEST_CASE("empty database behaves as a plain decode") {
  MockBackend backend(std::map<char32_t, char32_t>{{U'郁', U'玉'}});
  EntityDatabase empty;
  empty.layer_range = default_layer_range();
  empty.model_id = "mock";
  empty.hidden_dim = 16;
  empty.frame_duration_s = 0.1;

  AudioBuffer audio = mock_tts("邓郁松");
  BiasedResult r = transcribe(audio, empty, shared_classifier(), backend,
                              desk_options(PromptStyle::kSpokenForm));
  CHECK(r.text == "邓玉松");
  CHECK(r.prompt_used.empty());
  CHECK(r.detected.empty());
}

TEST_CASE("compression fallback re-decodes without prompt exactly once") {
  MockBackend rigged(std::map<char32_t, char32_t>{},
                     MockBackend::DecodeRig::kRepeatWhenPrompted);
  CountingBackend backend(rigged);
  EntityDatabase db = table_db(rigged, {"邓郁松"});
  AudioBuffer audio = mock_tts("记者邓郁松日前");

  BiasedResult r = transcribe(audio, db, shared_classifier(), backend,
                              desk_options(PromptStyle::kNaive));
  CHECK(r.fallback_triggered);
  CHECK(r.compression_ratio > 2.0);
  CHECK(r.text == "记者邓郁松日前");   // the no-prompt decode
  CHECK(backend.decode_calls() == 2);  // prompted + one fallback, never more

  SUBCASE("natural decode does not trigger the fallback") {
    MockBackend id(std::map<char32_t, char32_t>{});
    CountingBackend counted(id);
    BiasedResult ok = transcribe(audio, db, shared_classifier(), counted,
                                 desk_options(PromptStyle::kNaive));
    CHECK(!ok.fallback_triggered);
    CHECK(ok.compression_ratio <= 2.0);
    CHECK(counted.decode_calls() == 1);
  }
}

TEST_CASE("prompt entity cap keeps the highest logits") {
  MockBackend backend;
  // 40 two-char entities; with threshold -inf all are accepted.
  std::vector<std::string> surfaces;
  for (int i = 0; i < 40; ++i) {
    surfaces.push_back(utf8_encode({static_cast<char32_t>(0x4E00 + i),
                                    static_cast<char32_t>(0x4E00 + i + 1)}));
  }
  EntityDatabase db = table_db(backend, surfaces);
  TranscribeOptions opts = desk_options(PromptStyle::kNaive);
  opts.threshold = -std::numeric_limits<double>::infinity();

  BiasedResult r = transcribe(mock_tts("天地玄黄宇宙洪荒"), db,
                              shared_classifier(), backend, opts);
  CHECK(r.detected.size() == 40);
  // Naive zh prompt: 32 entities joined by 、
  size_t separators = 0;
  size_t pos = 0;
  while ((pos = r.prompt_used.find("、", pos)) != std::string::npos) {
    ++separators;
    pos += std::string("、").size();
  }
  CHECK(separators == kMaxPromptEntities - 1);
}

TEST_CASE("transcribe_corpus preserves order and isolates failures") {
  MockBackend backend(std::map<char32_t, char32_t>{{U'郁', U'玉'}});
  EntityDatabase db = table_db(backend, {"邓郁松", "市场机制"});
  MockTtsClient tts;

  std::vector<CorpusUtterance> corpus = {
      {"u1", "", "记者邓郁松日前"},
      {"u2", "/nonexistent/audio.wav", "暂缺"},
      {"u3", "", "市场机制要起到作用"},
  };
  CorpusRunResult run = transcribe_corpus(corpus, db, shared_classifier(),
                                          backend, tts,
                                          desk_options(PromptStyle::kNaive));
  REQUIRE(run.results.size() == 2);
  CHECK(run.results[0].utterance_id == "u1");
  CHECK(run.results[1].utterance_id == "u3");
  REQUIRE(run.failures.size() == 1);
  CHECK(run.failures[0].utterance_id == "u2");
  CHECK(run.manifest.at("transcribed").get<size_t>() == 2);
  CHECK(run.manifest.at("failures").size() == 1);
  CHECK(run.manifest.at("options").at("prompt_style") == "naive");
  CHECK(run.manifest.at("backend").at("model_id") == "mock");

  SUBCASE("reruns are deterministic") {
    CorpusRunResult again = transcribe_corpus(corpus, db, shared_classifier(),
                                              backend, tts,
                                              desk_options(PromptStyle::kNaive));
    REQUIRE(again.results.size() == run.results.size());
    for (size_t i = 0; i < run.results.size(); ++i) {
      CHECK(again.results[i].text == run.results[i].text);
      CHECK(again.results[i].prompt_used == run.results[i].prompt_used);
    }
  }
}
