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

#ifndef CBASR_METRICS_HPP_
#define CBASR_METRICS_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cbasr {

// Mixed-unit tokenization for code-switching scoring: each Chinese
// character, each Latin word and each digit string is one unit. Scoring
// never counts punctuation; text is width-folded and Latin is lowercased
// before tokenizing.

enum class TokenKind { kHan, kLatin, kDigit };

struct MixedToken {
  std::string text;
  TokenKind kind;
};

bool operator==(const MixedToken& a, const MixedToken& b);

std::vector<MixedToken> tokenize_mixed(const std::string& text);

// Canonical scoring form: tokens joined back together, with a space only
// between adjacent Latin/digit tokens. tokenize_mixed(canonical_text(x))
// round-trips exactly.
std::string canonical_text(const std::string& text);

enum class EditOp { kMatch, kSubstitute, kInsert, kDelete };

struct AlignmentStep {
  EditOp op;
  std::string ref;  // empty for insertions
  std::string hyp;  // empty for deletions
};

struct Alignment {
  std::vector<AlignmentStep> ops;
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int matches = 0;
  int ref_tokens = 0;

  int distance() const { return substitutions + deletions + insertions; }
  double mer() const {
    return ref_tokens > 0 ? static_cast<double>(distance()) / ref_tokens : 0.0;
  }
  double mer_percent() const { return 100.0 * mer(); }
};

// Minimal-edit-distance alignment over mixed tokens. Equivalent to CER on
// pure Chinese and WER on pure English. Empty reference is an input error.
Alignment mer_align(const std::string& ref, const std::string& hyp);

// ---------------------------------------------------------------------------
// Entity recall
// ---------------------------------------------------------------------------

struct UtteranceEntities {
  std::string utterance_id;
  std::vector<std::string> entities;  // gold occurrences, one entry each
};

struct EntityHit {
  std::string utterance_id;
  std::string entity;
  bool recognized = false;
};

struct EntityRecallResult {
  int total = 0;
  int hits = 0;
  std::vector<EntityHit> details;

  double percent() const {
    return total > 0 ? 100.0 * hits / total : 0.0;
  }
};

// An occurrence counts as recognized iff the entity's canonical form
// appears as a substring of the canonical hypothesis; Latin edges must sit
// on word boundaries so "DNN" never matches inside "EmptyDNN".
bool entity_in_text(const std::string& entity, const std::string& text);

EntityRecallResult entity_recall(
    const std::vector<UtteranceEntities>& gold,
    const std::map<std::string, std::string>& hyp_by_id);

// ---------------------------------------------------------------------------
// KWS precision / recall / F1
// ---------------------------------------------------------------------------

struct KwsScore {
  int tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<double> precision;  // null when nothing was predicted
  std::optional<double> recall;     // null when there are no gold positives
  std::optional<double> f1;
};

KwsScore kws_scores(const std::vector<bool>& predicted,
                    const std::vector<bool>& gold);

// ---------------------------------------------------------------------------
// Aggregated report
// ---------------------------------------------------------------------------

struct ConditionSummary {
  std::string name;
  double mer_percent = 0.0;
  double entity_recall_percent = 0.0;
  bool has_recall = false;
  int ref_tokens = 0;
  int edits = 0;
};

struct UtteranceScore {
  std::string condition;
  std::string utterance_id;
  int substitutions = 0, deletions = 0, insertions = 0, ref_tokens = 0;
  double mer_percent = 0.0;
};

struct EvalReport {
  std::vector<ConditionSummary> conditions;
  std::vector<UtteranceScore> rows;

  nlohmann::json to_json() const;
  std::string to_table() const;  // aligned text table, "MER / Recall" per row
};

struct EvalInputs {
  // Ordered (utterance_id, reference text).
  std::vector<std::pair<std::string, std::string>> refs;
  // condition name -> utterance_id -> hypothesis text. Every condition must
  // cover exactly the reference ids.
  std::map<std::string, std::map<std::string, std::string>> conditions;
  // Optional gold entity occurrences; empty disables recall columns.
  std::vector<UtteranceEntities> gold_entities;
};

EvalReport evaluate(const EvalInputs& inputs);

}  // namespace cbasr

#endif  // CBASR_METRICS_HPP_
