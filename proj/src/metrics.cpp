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

#include "cbasr/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "cbasr/error.hpp"
#include "cbasr/text.hpp"

namespace cbasr {

using nlohmann::json;

namespace {

bool is_cjk_punct(char32_t cp) {
  return (cp >= 0x2000 && cp <= 0x206F) ||  // general punctuation
         (cp >= 0x2E00 && cp <= 0x2E7F) ||
         (cp >= 0x3000 && cp <= 0x303F) ||  // CJK symbols and punctuation
         (cp >= 0xFE10 && cp <= 0xFE1F) ||
         (cp >= 0xFE30 && cp <= 0xFE4F) ||
         (cp >= 0xFF5F && cp <= 0xFF65) ||
         (cp >= 0xFFE0 && cp <= 0xFFEE) ||
         cp == 0x00B7 || cp == 0x00AB || cp == 0x00BB;
}

bool is_ascii_punct(char32_t cp) {
  return cp < 0x80 && !is_latin_letter(cp) && !is_ascii_digit(cp) &&
         cp != ' ';
}

}  // namespace

bool operator==(const MixedToken& a, const MixedToken& b) {
  return a.text == b.text && a.kind == b.kind;
}

std::vector<MixedToken> tokenize_mixed(const std::string& text) {
  std::vector<MixedToken> tokens;
  std::vector<char32_t> run;
  TokenKind run_kind = TokenKind::kLatin;

  auto flush = [&]() {
    if (!run.empty()) {
      tokens.push_back({utf8_encode(run), run_kind});
      run.clear();
    }
  };

  for (char32_t raw : utf8_decode(text)) {
    char32_t cp = to_lower_latin(fold_width(raw));
    if (is_latin_letter(cp)) {
      if (!run.empty() && run_kind != TokenKind::kLatin) flush();
      run_kind = TokenKind::kLatin;
      run.push_back(cp);
    } else if (is_ascii_digit(cp)) {
      if (!run.empty() && run_kind != TokenKind::kDigit) flush();
      run_kind = TokenKind::kDigit;
      run.push_back(cp);
    } else if (is_han(cp)) {
      flush();
      tokens.push_back({utf8_encode_one(cp), TokenKind::kHan});
    } else if (cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' ||
               is_ascii_punct(cp) || is_cjk_punct(cp) || cp == 0xFFFD) {
      flush();  // separators and punctuation never score
    } else {
      // Other scripts: one character, one unit.
      flush();
      tokens.push_back({utf8_encode_one(cp), TokenKind::kHan});
    }
  }
  flush();
  return tokens;
}

std::string canonical_text(const std::string& text) {
  auto tokens = tokenize_mixed(text);
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    bool prev_word = i > 0 && tokens[i - 1].kind != TokenKind::kHan;
    bool cur_word = tokens[i].kind != TokenKind::kHan;
    if (i > 0 && prev_word && cur_word) out += ' ';
    out += tokens[i].text;
  }
  return out;
}

Alignment mer_align(const std::string& ref, const std::string& hyp) {
  std::vector<MixedToken> r = tokenize_mixed(ref);
  std::vector<MixedToken> h = tokenize_mixed(hyp);
  if (r.empty()) {
    throw Error(ErrorKind::kInput,
                "reference is empty after tokenization: '" + ref + "'");
  }

  const size_t n = r.size(), m = h.size();
  std::vector<std::vector<int>> dist(n + 1, std::vector<int>(m + 1, 0));
  for (size_t i = 0; i <= n; ++i) dist[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) dist[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      int sub = dist[i - 1][j - 1] + (r[i - 1].text == h[j - 1].text ? 0 : 1);
      int del = dist[i - 1][j] + 1;
      int ins = dist[i][j - 1] + 1;
      dist[i][j] = std::min({sub, del, ins});
    }
  }

  Alignment out;
  out.ref_tokens = static_cast<int>(n);
  size_t i = n, j = m;
  std::vector<AlignmentStep> rev;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        dist[i][j] ==
            dist[i - 1][j - 1] + (r[i - 1].text == h[j - 1].text ? 0 : 1)) {
      bool match = r[i - 1].text == h[j - 1].text;
      rev.push_back({match ? EditOp::kMatch : EditOp::kSubstitute,
                     r[i - 1].text, h[j - 1].text});
      if (match) {
        ++out.matches;
      } else {
        ++out.substitutions;
      }
      --i;
      --j;
    } else if (i > 0 && dist[i][j] == dist[i - 1][j] + 1) {
      rev.push_back({EditOp::kDelete, r[i - 1].text, ""});
      ++out.deletions;
      --i;
    } else {
      rev.push_back({EditOp::kInsert, "", h[j - 1].text});
      ++out.insertions;
      --j;
    }
  }
  out.ops.assign(rev.rbegin(), rev.rend());
  return out;
}

bool entity_in_text(const std::string& entity, const std::string& text) {
  std::vector<char32_t> e = utf8_decode(canonical_text(entity));
  std::vector<char32_t> t = utf8_decode(canonical_text(text));
  if (e.empty() || t.empty() || e.size() > t.size()) return false;

  auto wordish = [](char32_t cp) {
    return is_latin_letter(cp) || is_ascii_digit(cp);
  };
  for (size_t start = 0; start + e.size() <= t.size(); ++start) {
    bool equal = true;
    for (size_t k = 0; k < e.size(); ++k) {
      if (t[start + k] != e[k]) {
        equal = false;
        break;
      }
    }
    if (!equal) continue;
    // Latin/digit edges must sit on word boundaries.
    if (wordish(e.front()) && start > 0 && wordish(t[start - 1])) continue;
    size_t end = start + e.size();
    if (wordish(e.back()) && end < t.size() && wordish(t[end])) continue;
    return true;
  }
  return false;
}

EntityRecallResult entity_recall(
    const std::vector<UtteranceEntities>& gold,
    const std::map<std::string, std::string>& hyp_by_id) {
  EntityRecallResult out;
  for (const auto& utt : gold) {
    auto it = hyp_by_id.find(utt.utterance_id);
    const std::string hyp = it != hyp_by_id.end() ? it->second : "";
    for (const auto& entity : utt.entities) {
      bool hit = !hyp.empty() && entity_in_text(entity, hyp);
      out.details.push_back({utt.utterance_id, entity, hit});
      ++out.total;
      if (hit) ++out.hits;
    }
  }
  if (out.total == 0) {
    throw Error(ErrorKind::kInput, "no gold entity occurrences to score");
  }
  return out;
}

KwsScore kws_scores(const std::vector<bool>& predicted,
                    const std::vector<bool>& gold) {
  if (predicted.size() != gold.size()) {
    throw Error(ErrorKind::kInput,
                "predicted/gold size mismatch: " +
                    std::to_string(predicted.size()) + " vs " +
                    std::to_string(gold.size()));
  }
  KwsScore s;
  for (size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] && gold[i]) ++s.tp;
    else if (predicted[i] && !gold[i]) ++s.fp;
    else if (!predicted[i] && gold[i]) ++s.fn;
    else ++s.tn;
  }
  if (s.tp + s.fp > 0)
    s.precision = static_cast<double>(s.tp) / (s.tp + s.fp);
  if (s.tp + s.fn > 0) s.recall = static_cast<double>(s.tp) / (s.tp + s.fn);
  if (s.precision.has_value() && s.recall.has_value() &&
      *s.precision + *s.recall > 0) {
    s.f1 = 2.0 * *s.precision * *s.recall / (*s.precision + *s.recall);
  }
  return s;
}

json EvalReport::to_json() const {
  json conds = json::array();
  for (const auto& c : conditions) {
    json row = {{"condition", c.name},
                {"mer_percent", c.mer_percent},
                {"ref_tokens", c.ref_tokens},
                {"edits", c.edits}};
    if (c.has_recall) row["entity_recall_percent"] = c.entity_recall_percent;
    conds.push_back(row);
  }
  json utts = json::array();
  for (const auto& r : rows) {
    utts.push_back({{"condition", r.condition},
                    {"utterance_id", r.utterance_id},
                    {"substitutions", r.substitutions},
                    {"deletions", r.deletions},
                    {"insertions", r.insertions},
                    {"ref_tokens", r.ref_tokens},
                    {"mer_percent", r.mer_percent}});
  }
  return json{{"conditions", conds}, {"utterances", utts}};
}

std::string EvalReport::to_table() const {
  size_t name_width = 9;
  for (const auto& c : conditions) {
    name_width = std::max(name_width, c.name.size());
  }
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width) + 2)
      << "condition" << "MER(%) / Recall(%)\n";
  for (const auto& c : conditions) {
    out << std::left << std::setw(static_cast<int>(name_width) + 2) << c.name
        << std::fixed << std::setprecision(1) << c.mer_percent << " / ";
    if (c.has_recall) {
      out << std::fixed << std::setprecision(1) << c.entity_recall_percent;
    } else {
      out << "-";
    }
    out << "\n";
  }
  return out.str();
}

EvalReport evaluate(const EvalInputs& inputs) {
  if (inputs.refs.empty())
    throw Error(ErrorKind::kInput, "no reference utterances");
  if (inputs.conditions.empty())
    throw Error(ErrorKind::kInput, "no hypothesis conditions");

  EvalReport report;
  for (const auto& [name, hyps] : inputs.conditions) {
    long total_edits = 0, total_tokens = 0;
    std::map<std::string, std::string> hyp_map;
    for (const auto& [utt_id, ref_text] : inputs.refs) {
      auto it = hyps.find(utt_id);
      if (it == hyps.end()) {
        throw Error(ErrorKind::kInput, "condition '" + name +
                                           "' is missing utterance '" +
                                           utt_id + "'");
      }
      hyp_map[utt_id] = it->second;
      Alignment a = mer_align(ref_text, it->second);
      total_edits += a.distance();
      total_tokens += a.ref_tokens;
      report.rows.push_back({name, utt_id, a.substitutions, a.deletions,
                             a.insertions, a.ref_tokens, a.mer_percent()});
    }
    if (hyps.size() != inputs.refs.size()) {
      throw Error(ErrorKind::kInput,
                  "condition '" + name + "' has extra utterances");
    }

    ConditionSummary summary;
    summary.name = name;
    summary.edits = static_cast<int>(total_edits);
    summary.ref_tokens = static_cast<int>(total_tokens);
    summary.mer_percent =
        total_tokens > 0 ? 100.0 * total_edits / total_tokens : 0.0;
    if (!inputs.gold_entities.empty()) {
      EntityRecallResult rec = entity_recall(inputs.gold_entities, hyp_map);
      summary.entity_recall_percent = rec.percent();
      summary.has_recall = true;
    }
    report.conditions.push_back(summary);
  }
  return report;
}

}  // namespace cbasr
