#include <doctest.h>

#include <map>
#include <numeric>
#include <random>

#include "cbasr/error.hpp"
#include "cbasr/metrics.hpp"
#include "test_util.hpp"

using namespace cbasr;
using cbasr::testing::throws_kind;

namespace {

// Independent distance oracle: plain two-row DP over token texts, no
// backtrace, no sharing with the implementation under test.
int edit_distance_oracle(const std::vector<MixedToken>& a,
                         const std::vector<MixedToken>& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      int sub = prev[j - 1] + (a[i - 1].text == b[j - 1].text ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

const std::vector<std::string> kHanPool = {
    "北", "京", "报", "讯", "记", "者", "邓", "郁", "松", "日",
    "前", "银", "行", "业", "金", "融", "机", "构", "市", "场"};
const std::vector<std::string> kLatinPool = {
    "hello", "world", "model", "data", "test", "mtdnn", "speech", "entity"};
const std::vector<std::string> kDigitPool = {"1", "42", "2024", "7"};

std::string random_mixed_text(std::mt19937& rng, int max_tokens) {
  std::uniform_int_distribution<int> len_dist(0, max_tokens);
  std::uniform_int_distribution<int> class_dist(0, 9);
  std::uniform_int_distribution<int> punct_dist(0, 5);
  int n = len_dist(rng);
  std::string out;
  for (int i = 0; i < n; ++i) {
    int cls = class_dist(rng);
    if (cls < 6) {
      out += kHanPool[rng() % kHanPool.size()];
    } else if (cls < 9) {
      if (!out.empty()) out += ' ';
      out += kLatinPool[rng() % kLatinPool.size()];
      out += ' ';
    } else {
      if (!out.empty()) out += ' ';
      out += kDigitPool[rng() % kDigitPool.size()];
      out += ' ';
    }
    if (punct_dist(rng) == 0) out += "，";
    if (punct_dist(rng) == 1) out += ", ";
  }
  return out;
}

}  // namespace

TEST_CASE("mixed tokenization") {
  auto tokens = tokenize_mixed("北京hello world报");
  REQUIRE(tokens.size() == 5);
  CHECK(tokens[0].text == "北");
  CHECK(tokens[0].kind == TokenKind::kHan);
  CHECK(tokens[2].text == "hello");
  CHECK(tokens[2].kind == TokenKind::kLatin);
  CHECK(tokens[4].text == "报");

  CHECK(tokenize_mixed("").empty());

  auto latin = tokenize_mixed("MTDNN maintained number");
  REQUIRE(latin.size() == 3);
  for (const auto& t : latin) CHECK(t.kind == TokenKind::kLatin);
  CHECK(latin[0].text == "mtdnn");

  auto digits = tokenize_mixed("层数是12层");
  REQUIRE(digits.size() == 5);
  CHECK(digits[3].kind == TokenKind::kDigit);
  CHECK(digits[3].text == "12");
}

TEST_CASE("tokenization drops punctuation and folds width") {
  auto a = tokenize_mixed("邓郁松认为。");
  CHECK(a.size() == 5);
  auto b = tokenize_mixed("ＭＴＤＮＮ， maintained!");
  REQUIRE(b.size() == 2);
  CHECK(b[0].text == "mtdnn");
  auto c = tokenize_mixed("这个不太能用什么bp啊、梯度base的computation啊来做");
  bool has_bp = false, has_base = false;
  for (const auto& t : c) {
    if (t.text == "bp") has_bp = true;
    if (t.text == "base") has_base = true;
  }
  CHECK(has_bp);
  CHECK(has_base);
}

TEST_CASE("canonical text round trips through the tokenizer") {
  std::mt19937 rng(7);
  for (int i = 0; i < 200; ++i) {
    std::string text = random_mixed_text(rng, 12);
    std::string canon = canonical_text(text);
    CHECK(tokenize_mixed(canon) == tokenize_mixed(text));
    CHECK(canonical_text(canon) == canon);
  }
  CHECK(canonical_text("北京hello   world报") == "北京hello world报");
  CHECK(canonical_text("hello 北京 world") == "hello北京world");
}

TEST_CASE("mer basics") {
  CHECK(mer_align("邓郁松认为", "邓郁松认为").mer_percent() ==
        doctest::Approx(0.0));

  // Table-style single substitution: 1/5 han units.
  Alignment a = mer_align("邓郁松认为", "邓玉松认为");
  CHECK(a.substitutions == 1);
  CHECK(a.deletions == 0);
  CHECK(a.insertions == 0);
  CHECK(a.ref_tokens == 5);
  CHECK(a.mer_percent() == doctest::Approx(20.0));

  // One inserted latin word over 3 reference units.
  Alignment b = mer_align("北京 hello", "北京 hello hello");
  CHECK(b.insertions == 1);
  CHECK(b.ref_tokens == 3);
  CHECK(b.mer_percent() == doctest::Approx(100.0 / 3.0));

  CHECK(throws_kind(ErrorKind::kInput, [] { mer_align("", "hyp"); }));
  CHECK(throws_kind(ErrorKind::kInput, [] { mer_align("。，", "hyp"); }));
}

TEST_CASE("mer is whitespace and punctuation invariant") {
  CHECK(mer_align("hello  world", "hello world").distance() == 0);
  CHECK(mer_align("北京，hello。", "北京hello").distance() == 0);
  // Punctuation differences do not count; "maintained" vs "maintain" does.
  CHECK(mer_align("MTDNN maintained number of classes, heads, output layers.",
                  "MTDNN maintain number of classes' heads, output layers,")
            .distance() == 1);
}

TEST_CASE("mer equals CER on pure Chinese and WER on pure English") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    // Pure Chinese: character-level distance.
    std::string ref_zh, hyp_zh;
    int rn = 1 + static_cast<int>(rng() % 10);
    int hn = static_cast<int>(rng() % 10);
    for (int i = 0; i < rn; ++i) ref_zh += kHanPool[rng() % kHanPool.size()];
    for (int i = 0; i < hn; ++i) hyp_zh += kHanPool[rng() % kHanPool.size()];
    CHECK(mer_align(ref_zh, hyp_zh).distance() ==
          edit_distance_oracle(tokenize_mixed(ref_zh),
                               tokenize_mixed(hyp_zh)));

    // Pure English: word-level distance.
    std::string ref_en, hyp_en;
    for (int i = 0; i < rn; ++i) {
      ref_en += kLatinPool[rng() % kLatinPool.size()];
      ref_en += ' ';
    }
    for (int i = 0; i < hn; ++i) {
      hyp_en += kLatinPool[rng() % kLatinPool.size()];
      hyp_en += ' ';
    }
    CHECK(mer_align(ref_en, hyp_en).distance() ==
          edit_distance_oracle(tokenize_mixed(ref_en),
                               tokenize_mixed(hyp_en)));
  }
}

TEST_CASE("mer matches the brute-force oracle on random mixed pairs") {
  std::mt19937 rng(23);
  int checked = 0;
  while (checked < 300) {
    std::string ref = random_mixed_text(rng, 12);
    std::string hyp = random_mixed_text(rng, 12);
    if (tokenize_mixed(ref).empty()) continue;
    ++checked;
    Alignment a = mer_align(ref, hyp);
    int oracle =
        edit_distance_oracle(tokenize_mixed(ref), tokenize_mixed(hyp));
    CHECK(a.distance() == oracle);
    // Structural invariants of the alignment.
    CHECK(a.substitutions + a.deletions + a.matches == a.ref_tokens);
    CHECK(a.mer() <=
          static_cast<double>(tokenize_mixed(ref).size() +
                              tokenize_mixed(hyp).size()) /
              tokenize_mixed(ref).size());
  }
}

TEST_CASE("mer matches the oracle exhaustively on small instances") {
  // Every (ref, hyp) pair over a 3-symbol alphabet up to length 4.
  const std::vector<std::string> alphabet = {"北", "hello", "7"};
  std::vector<std::string> texts;
  std::vector<std::vector<int>> stack = {{}};
  for (int len = 0; len <= 4; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& seq : stack) {
      std::string text;
      for (int s : seq) {
        text += alphabet[s];
        text += ' ';
      }
      texts.push_back(text);
      if (len < 4) {
        for (int s = 0; s < 3; ++s) {
          auto grown = seq;
          grown.push_back(s);
          next.push_back(grown);
        }
      }
    }
    stack = std::move(next);
  }
  for (const auto& ref : texts) {
    if (tokenize_mixed(ref).empty()) continue;
    for (const auto& hyp : texts) {
      CHECK(mer_align(ref, hyp).distance() ==
            edit_distance_oracle(tokenize_mixed(ref), tokenize_mixed(hyp)));
    }
  }
}

TEST_CASE("entity recall") {
  std::map<std::string, std::string> hyps = {
      {"u1", "国务院发展研究中心市场经济研究所副所长邓郁松认为"},
      {"u2", "EmptyDNN maintains a number of classes' heads"},
      {"u3", "这个不太能用什么bp 梯度base的computation来做"},
  };
  std::vector<UtteranceEntities> gold = {
      {"u1", {"邓郁松"}},
      {"u2", {"MTDNN"}},
      {"u3", {"梯度base的computation", "bp啊"}},
  };
  EntityRecallResult res = entity_recall(gold, hyps);
  CHECK(res.total == 4);
  // 邓郁松 hit, MTDNN missed (EmptyDNN is not a boundary match),
  // 梯度base的computation hit, "bp啊" missed (啊 absent in hyp).
  CHECK(res.hits == 2);
  CHECK(res.percent() == doctest::Approx(50.0));

  SUBCASE("all entities present") {
    std::vector<UtteranceEntities> g1 = {{"u1", {"邓郁松", "研究中心"}}};
    CHECK(entity_recall(g1, hyps).percent() == doctest::Approx(100.0));
  }
  SUBCASE("latin word boundaries are respected") {
    CHECK(!entity_in_text("DNN", "EmptyDNN maintains"));
    CHECK(entity_in_text("DNN", "the DNN maintains"));
    CHECK(entity_in_text("DNN", "用DNN来做"));
    CHECK(!entity_in_text("number", "numbers"));
  }
  SUBCASE("zero gold occurrences is an input error") {
    std::vector<UtteranceEntities> empty_gold;
    CHECK(throws_kind(ErrorKind::kInput,
                      [&] { entity_recall(empty_gold, hyps); }));
  }
  SUBCASE("recall is monotone under adding gold strings to the hypothesis") {
    std::vector<UtteranceEntities> g = {{"u2", {"MTDNN", "classes"}}};
    auto before = entity_recall(g, hyps);
    auto augmented = hyps;
    augmented["u2"] += " MTDNN";
    auto after = entity_recall(g, augmented);
    CHECK(after.hits >= before.hits);
    CHECK(after.hits == 2);
  }
}

TEST_CASE("kws precision recall f1") {
  SUBCASE("all correct") {
    KwsScore s = kws_scores({true, false, true}, {true, false, true});
    CHECK(*s.precision == doctest::Approx(1.0));
    CHECK(*s.recall == doctest::Approx(1.0));
    CHECK(*s.f1 == doctest::Approx(1.0));
  }
  SUBCASE("no predictions leaves precision null") {
    KwsScore s = kws_scores({false, false}, {true, false});
    CHECK(!s.precision.has_value());
    CHECK(*s.recall == doctest::Approx(0.0));
    CHECK(!s.f1.has_value());
  }
  SUBCASE("reported operating point reproduces the F1 identity") {
    // Counts chosen so precision = 0.398 and recall = 0.803 exactly:
    // tp / (tp+fp) = 159797 / 401500, tp / (tp+fn) = 159797 / 199000.
    const int tp = 159797, fp = 401500 - tp, fn = 199000 - tp;
    std::vector<bool> predicted, gold;
    for (int i = 0; i < tp; ++i) { predicted.push_back(true); gold.push_back(true); }
    for (int i = 0; i < fp; ++i) { predicted.push_back(true); gold.push_back(false); }
    for (int i = 0; i < fn; ++i) { predicted.push_back(false); gold.push_back(true); }
    KwsScore s = kws_scores(predicted, gold);
    CHECK(*s.precision == doctest::Approx(0.398).epsilon(1e-9));
    CHECK(*s.recall == doctest::Approx(0.803).epsilon(1e-9));
    CHECK(std::abs(*s.f1 - 0.532) < 0.001);
  }
  SUBCASE("size mismatch") {
    CHECK(throws_kind(ErrorKind::kInput,
                      [] { kws_scores({true}, {true, false}); }));
  }
}

TEST_CASE("evaluate aggregates conditions") {
  EvalInputs inputs;
  inputs.refs = {{"u1", "邓郁松认为"}, {"u2", "北京 hello"}};
  inputs.conditions["no_prompt"] = {{"u1", "邓玉松认为"}, {"u2", "北京 hello"}};
  inputs.conditions["predicted"] = {{"u1", "邓郁松认为"}, {"u2", "北京 hello"}};
  inputs.gold_entities = {{"u1", {"邓郁松"}}};

  EvalReport report = evaluate(inputs);
  REQUIRE(report.conditions.size() == 2);
  // std::map orders conditions by name.
  CHECK(report.conditions[0].name == "no_prompt");
  CHECK(report.conditions[0].mer_percent == doctest::Approx(100.0 / 8.0));
  CHECK(report.conditions[0].entity_recall_percent == doctest::Approx(0.0));
  CHECK(report.conditions[1].mer_percent == doctest::Approx(0.0));
  CHECK(report.conditions[1].entity_recall_percent == doctest::Approx(100.0));
  CHECK(report.rows.size() == 4);

  std::string table = report.to_table();
  CHECK(table.find("no_prompt") != std::string::npos);
  CHECK(table.find("/") != std::string::npos);
  CHECK(report.to_json().contains("conditions"));

  SUBCASE("mismatched utterance ids") {
    inputs.conditions["predicted"].erase("u2");
    CHECK(throws_kind(ErrorKind::kInput, [&] { evaluate(inputs); }));
  }
  SUBCASE("empty results") {
    EvalInputs empty;
    CHECK(throws_kind(ErrorKind::kInput, [&] { evaluate(empty); }));
  }
}
