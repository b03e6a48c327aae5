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

#include "cbasr/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbasr/config.hpp"
#include "cbasr/entity_db.hpp"
#include "cbasr/error.hpp"
#include "cbasr/metrics.hpp"
#include "cbasr/storage.hpp"

namespace fs = std::filesystem;

namespace cbasr {

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitStageFailure = 1;
constexpr int kExitUsage = 2;

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

json base_manifest(const std::string& subcommand, const RunConfig& cfg,
                   const Stopwatch& watch) {
  return json{{"subcommand", subcommand},
              {"config", cfg.to_json()},
              {"config_hash", cfg.config_hash()},
              {"seed", cfg.seed},
              {"elapsed_ms", watch.elapsed_ms()}};
}

void write_manifest_file(const std::string& path, const json& manifest) {
  write_text_file(path, manifest.dump(2) + "\n");
}

std::string manifest_path_for_file(const std::string& output) {
  return output + ".manifest.json";
}

std::string manifest_path_for_dir(const std::string& dir) {
  return (fs::path(dir) / "run_manifest.json").string();
}

// Flags shared by every subcommand, mapped onto dotted config keys.
struct CommonFlags {
  std::string config_path;
  json overrides = json::object();

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    add_override<std::string>(cmd, "--backend", "backend");
    add_override<std::string>(cmd, "--backend-endpoint", "backend.endpoint");
    add_override<std::string>(cmd, "--layers", "layers");
    add_override<std::string>(cmd, "--tts-provider", "tts.provider");
    add_override<std::string>(cmd, "--tts-endpoint", "tts.endpoint");
    add_override<std::string>(cmd, "--voice", "tts.voice_zh");
    add_override<std::string>(cmd, "--voice-en", "tts.voice_en");
    add_override<std::string>(cmd, "--tts-cache", "tts.cache_dir");
    add_override<std::string>(cmd, "--arch", "classifier.architecture");
    add_override<int>(cmd, "--epochs", "classifier.epochs");
    add_override<int>(cmd, "--batch-size", "classifier.batch_size");
    add_override<double>(cmd, "--lr", "classifier.learning_rate");
    add_override<int>(cmd, "--entity-axis", "classifier.entity_axis_target");
    add_override<int>(cmd, "--num-threads", "classifier.num_threads");
    add_override<int>(cmd, "--positives-per-utterance",
                      "sampling.positives_per_utterance");
    add_override<int>(cmd, "--random-negatives", "sampling.random_negatives");
    add_override<int>(cmd, "--confusing-negatives",
                      "sampling.confusing_negatives");
    add_override<int>(cmd, "--window", "sampling.neighbor_window");
    add_override<int>(cmd, "--min-len", "vocab.min_len");
    add_override<int>(cmd, "--max-len", "vocab.max_len");
    add_override<uint64_t>(cmd, "--vocab-size", "vocab.size");
    add_override<std::string>(cmd, "--prompt-style", "prompt.style");
    add_override<std::string>(cmd, "--language", "language");
    add_override<double>(cmd, "--threshold", "threshold");
    add_override<int>(cmd, "--beam", "beam");
    add_override<uint64_t>(cmd, "--seed", "seed");
    add_override<int>(cmd, "--parallelism", "parallelism");
  }

  // Returns nullopt (after printing every violation) when invalid.
  std::optional<RunConfig> resolve() const {
    ConfigValidation v = config_path.empty()
                             ? validate_config_json(json::object(), overrides)
                             : validate_config_file(config_path, overrides);
    if (!v.ok()) {
      for (const auto& e : v.errors) std::cerr << "config error: " << e << "\n";
      return std::nullopt;
    }
    return v.config;
  }

 private:
  template <typename T>
  void add_override(CLI::App* cmd, const std::string& flag,
                    const std::string& key) {
    cmd->add_option_function<T>(
        flag, [this, key](const T& value) { overrides[key] = value; });
  }
};

std::map<std::string, std::string> jsonl_text_by_id(const std::string& path) {
  std::map<std::string, std::string> out;
  for (const auto& row : read_jsonl(path)) {
    out[row.at("utterance_id").get<std::string>()] =
        row.at("text").get<std::string>();
  }
  return out;
}

int cmd_build_db(const RunConfig& cfg, const std::string& words_path,
                 const std::string& out_dir) {
  Stopwatch watch;
  auto words = read_words_file(words_path);
  auto backend = make_backend(cfg);
  auto tts = make_tts(cfg);

  EntityBuildOptions opts;
  opts.voice_zh = cfg.tts_voice_zh;
  opts.voice_en = cfg.tts_voice_en;
  opts.parallelism = cfg.parallelism;

  EntityBuildReport report;
  EntityDatabase db = build_entity_db(words, *tts, *backend, cfg.layer_range,
                                      opts, &report);
  save_entity_db(db, out_dir);

  json skipped = json::array();
  for (const auto& s : report.skipped) {
    skipped.push_back({{"surface", s.surface}, {"reason", s.reason}});
  }
  json manifest = base_manifest("build-db", cfg, watch);
  manifest["words_file"] = words_path;
  manifest["records"] = db.records.size();
  manifest["skipped"] = skipped;
  manifest["backend_fingerprint"] = {{"model_id", db.model_id},
                                     {"hidden_dim", db.hidden_dim},
                                     {"frame_duration_s", db.frame_duration_s}};
  write_manifest_file(manifest_path_for_dir(out_dir), manifest);

  std::cout << "built " << db.records.size() << " entity records ("
            << report.skipped.size() << " skipped) -> " << out_dir << "\n";
  return kExitOk;
}

int cmd_synth_dataset(const RunConfig& cfg, const std::string& corpus_path,
                      const std::string& dict_path,
                      const std::string& out_dir) {
  Stopwatch watch;
  auto corpus = load_corpus(corpus_path);
  std::vector<std::string> dictionary;
  if (!dict_path.empty()) {
    for (const auto& w : read_words_file(dict_path)) {
      dictionary.push_back(w.surface);
    }
  }
  GreedyDictSegmenter segmenter(dictionary);
  auto vocab = extract_vocab(corpus, segmenter, cfg.vocab_min_len,
                             cfg.vocab_max_len, cfg.vocab_size);

  auto backend = make_backend(cfg);
  auto tts = make_tts(cfg);
  KwsDataset ds = build_kws_dataset(corpus, vocab, *tts, *backend,
                                    cfg.layer_range, cfg.sampling);
  save_kws_dataset(ds, out_dir);

  std::vector<json> vocab_rows;
  vocab_rows.reserve(vocab.size());
  for (const auto& e : vocab) {
    vocab_rows.push_back({{"word", e.word},
                          {"frequency", e.frequency},
                          {"forward_rank", e.forward_rank},
                          {"reversed_rank", e.reversed_rank}});
  }
  write_jsonl((fs::path(out_dir) / "vocab.jsonl").string(), vocab_rows);

  json manifest = base_manifest("synth-dataset", cfg, watch);
  manifest["corpus"] = corpus_path;
  manifest["dataset"] = ds.manifest;
  write_manifest_file(manifest_path_for_dir(out_dir), manifest);

  std::cout << "dataset: " << ds.manifest.at("positives") << " positive / "
            << (ds.manifest.at("random_negatives").get<size_t>() +
                ds.manifest.at("confusing_negatives").get<size_t>())
            << " negative samples -> " << out_dir << "\n";
  return kExitOk;
}

int cmd_train_kws(const RunConfig& cfg, const std::string& data_dir,
                  const std::string& out_path) {
  Stopwatch watch;
  KwsDataset ds = load_kws_dataset(data_dir);
  TrainReport report;
  KwsClassifier clf = KwsClassifier::train(ds.samples, cfg.classifier, &report);
  clf.save(out_path);

  json epochs = json::array();
  for (size_t e = 0; e < report.epoch_loss.size(); ++e) {
    epochs.push_back({{"epoch", e + 1},
                      {"loss", report.epoch_loss[e]},
                      {"val_auc", report.epoch_val_auc[e]}});
  }
  json manifest = base_manifest("train-kws", cfg, watch);
  manifest["data"] = data_dir;
  manifest["train_samples"] = report.train_samples;
  manifest["val_samples"] = report.val_samples;
  manifest["epochs"] = epochs;
  manifest["final_val_auc"] = report.final_val_auc;
  write_manifest_file(manifest_path_for_file(out_path), manifest);

  std::cout << "trained " << kws_architecture_name(cfg.classifier.architecture)
            << " on " << report.train_samples << " samples, held-out AUC "
            << report.final_val_auc << " -> " << out_path << "\n";
  return kExitOk;
}

int cmd_score_kws(const RunConfig& cfg, const std::string& data_dir,
                  const std::string& ckpt_path, const std::string& out_path) {
  Stopwatch watch;
  KwsDataset ds = load_kws_dataset(data_dir);
  KwsClassifier clf = KwsClassifier::load(ckpt_path);

  std::vector<SimilarityMap> maps;
  maps.reserve(ds.samples.size());
  for (const auto& s : ds.samples) maps.push_back(s.map);
  std::vector<double> logits = clf.score(maps);

  std::vector<json> rows;
  rows.reserve(ds.samples.size());
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    rows.push_back({{"utterance_id", ds.samples[i].utterance_id},
                    {"word", ds.samples[i].word.surface},
                    {"label", ds.samples[i].positive ? "positive" : "negative"},
                    {"logit", logits[i]}});
  }
  write_jsonl(out_path, rows);

  json manifest = base_manifest("score-kws", cfg, watch);
  manifest["data"] = data_dir;
  manifest["classifier"] = ckpt_path;
  manifest["scored"] = rows.size();
  write_manifest_file(manifest_path_for_file(out_path), manifest);

  std::cout << "scored " << rows.size() << " samples -> " << out_path << "\n";
  return kExitOk;
}

int cmd_pr_curve(const RunConfig& cfg, const std::string& scores_path,
                 const std::string& out_path) {
  Stopwatch watch;
  std::vector<std::pair<double, bool>> scored;
  for (const auto& row : read_jsonl(scores_path)) {
    scored.push_back({row.at("logit").get<double>(),
                      row.at("label").get<std::string>() == "positive"});
  }
  auto curve = pr_curve(scored);

  json points = json::array();
  for (const auto& p : curve) {
    points.push_back({{"threshold_logit", p.threshold_logit},
                      {"threshold_prob", p.threshold_prob},
                      {"precision", p.precision},
                      {"recall", p.recall}});
  }
  json out = {{"points", points}, {"samples", scored.size()}};
  write_text_file(out_path, out.dump(2) + "\n");

  json manifest = base_manifest("pr-curve", cfg, watch);
  manifest["scores"] = scores_path;
  manifest["points"] = points.size();
  write_manifest_file(manifest_path_for_file(out_path), manifest);

  std::cout << "pr curve with " << points.size() << " points -> " << out_path
            << "\n";
  return kExitOk;
}

int cmd_transcribe(const RunConfig& cfg, const std::string& corpus_path,
                   const std::string& db_dir, const std::string& ckpt_path,
                   const std::string& out_path) {
  Stopwatch watch;
  auto corpus = load_corpus(corpus_path);
  auto backend = make_backend(cfg);
  EntityDatabase db = load_entity_db(db_dir, backend->info());
  KwsClassifier clf = KwsClassifier::load(ckpt_path);
  auto tts = make_tts(cfg);

  TranscribeOptions opts;
  opts.style = cfg.prompt_style;
  opts.language = cfg.language;
  opts.threshold = cfg.threshold;
  opts.beam = cfg.beam;
  opts.tts_voice = cfg.tts_voice_zh;

  CorpusRunResult run = transcribe_corpus(corpus, db, clf, *backend, *tts,
                                          opts, cfg.parallelism);

  std::vector<json> rows;
  rows.reserve(run.results.size());
  for (const auto& r : run.results) rows.push_back(biased_result_to_json(r));
  write_jsonl(out_path, rows);

  json manifest = base_manifest("transcribe", cfg, watch);
  manifest["corpus"] = corpus_path;
  manifest["entity_db"] = db_dir;
  manifest["classifier"] = ckpt_path;
  manifest["run"] = run.manifest;
  write_manifest_file(manifest_path_for_file(out_path), manifest);

  std::cout << "transcribed " << run.results.size() << "/" << corpus.size()
            << " utterances -> " << out_path << "\n";
  for (const auto& f : run.failures) {
    std::cerr << "failed " << f.utterance_id << ": " << f.message << "\n";
  }
  if (run.results.empty() && !corpus.empty()) return kExitStageFailure;
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& ref_path,
                 const std::vector<std::string>& hyp_specs,
                 const std::string& entities_path,
                 const std::string& out_path) {
  Stopwatch watch;
  EvalInputs inputs;
  for (const auto& row : read_jsonl(ref_path)) {
    inputs.refs.push_back({row.at("utterance_id").get<std::string>(),
                           row.at("text").get<std::string>()});
  }
  for (const auto& spec : hyp_specs) {
    std::string name, path;
    size_t eq = spec.find('=');
    if (eq != std::string::npos && eq > 0) {
      name = spec.substr(0, eq);
      path = spec.substr(eq + 1);
    } else {
      path = spec;
      name = fs::path(spec).stem().string();
    }
    inputs.conditions[name] = jsonl_text_by_id(path);
  }
  if (!entities_path.empty()) {
    for (const auto& row : read_jsonl(entities_path)) {
      UtteranceEntities ue;
      ue.utterance_id = row.at("utterance_id").get<std::string>();
      for (const auto& e : row.at("entities")) {
        ue.entities.push_back(e.get<std::string>());
      }
      inputs.gold_entities.push_back(std::move(ue));
    }
  }

  EvalReport report = evaluate(inputs);
  write_text_file(out_path, report.to_json().dump(2) + "\n");
  std::cout << report.to_table();

  json manifest = base_manifest("evaluate", cfg, watch);
  manifest["ref"] = ref_path;
  manifest["conditions"] = hyp_specs;
  write_manifest_file(manifest_path_for_file(out_path), manifest);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Contextual-biasing ASR toolkit: TTS-anchored keyword "
               "spotting over encoder hidden states, prompt-conditioned "
               "decoding and code-switching-aware scoring"};
  app.require_subcommand(1);

  struct {
    std::string words, out, corpus, dict, data, classifier, scores, ref,
        entities;
    std::vector<std::string> hyps;
  } io;

  std::vector<std::pair<CLI::App*, std::unique_ptr<CommonFlags>>> commands;
  auto add_command = [&](const char* name, const char* desc) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    auto flags = std::make_unique<CommonFlags>();
    flags->attach(cmd);
    commands.emplace_back(cmd, std::move(flags));
    return cmd;
  };

  CLI::App* build_db = add_command("build-db",
                                   "Build an entity database from a word list");
  build_db->add_option("--words", io.words, "one entity per line, UTF-8")
      ->required();
  build_db->add_option("--out", io.out, "output directory")->required();

  CLI::App* synth = add_command("synth-dataset",
                                "Generate a synthetic KWS training set");
  synth->add_option("--corpus", io.corpus, "JSONL corpus")->required();
  synth->add_option("--dict", io.dict, "segmentation dictionary (word list)");
  synth->add_option("--out", io.out, "output directory")->required();

  CLI::App* train = add_command("train-kws", "Train the KWS classifier");
  train->add_option("--data", io.data, "dataset directory")->required();
  train->add_option("--out", io.out, "checkpoint path")->required();

  CLI::App* score = add_command("score-kws", "Score a dataset with a classifier");
  score->add_option("--data", io.data, "dataset directory")->required();
  score->add_option("--classifier", io.classifier, "checkpoint")->required();
  score->add_option("--out", io.out, "scores JSONL")->required();

  CLI::App* pr = add_command("pr-curve", "Precision-recall curve from scores");
  pr->add_option("--scores", io.scores, "scores JSONL")->required();
  pr->add_option("--out", io.out, "curve JSON")->required();

  CLI::App* transcribe_cmd =
      add_command("transcribe", "Contextual-biasing transcription");
  transcribe_cmd->add_option("--corpus", io.corpus, "JSONL corpus")->required();
  transcribe_cmd->add_option("--db", io.data, "entity database directory")
      ->required();
  transcribe_cmd->add_option("--classifier", io.classifier, "checkpoint")
      ->required();
  transcribe_cmd->add_option("--out", io.out, "hypothesis JSONL")->required();

  CLI::App* eval_cmd = add_command("evaluate", "MER and entity recall");
  eval_cmd->add_option("--ref", io.ref, "reference JSONL")->required();
  eval_cmd
      ->add_option("--hyp", io.hyps,
                   "hypothesis JSONL, repeatable, optionally name=path")
      ->required();
  eval_cmd->add_option("--entities", io.entities, "gold entities JSONL");
  eval_cmd->add_option("--out", io.out, "report JSON")->required();

  std::vector<const char*> argv;
  argv.push_back("cbasr");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()),
              const_cast<char**>(argv.data()));
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  int rc = kExitStageFailure;
  try {
    CommonFlags* flags = nullptr;
    CLI::App* active = nullptr;
    for (auto& [cmd, f] : commands) {
      if (cmd->parsed()) {
        active = cmd;
        flags = f.get();
        break;
      }
    }
    auto cfg = flags->resolve();
    if (!cfg.has_value()) return kExitUsage;

    if (active == build_db) {
      rc = cmd_build_db(*cfg, io.words, io.out);
    } else if (active == synth) {
      rc = cmd_synth_dataset(*cfg, io.corpus, io.dict, io.out);
    } else if (active == train) {
      rc = cmd_train_kws(*cfg, io.data, io.out);
    } else if (active == score) {
      rc = cmd_score_kws(*cfg, io.data, io.classifier, io.out);
    } else if (active == pr) {
      rc = cmd_pr_curve(*cfg, io.scores, io.out);
    } else if (active == transcribe_cmd) {
      rc = cmd_transcribe(*cfg, io.corpus, io.data, io.classifier, io.out);
    } else if (active == eval_cmd) {
      rc = cmd_evaluate(*cfg, io.ref, io.hyps, io.entities, io.out);
    }
  } catch (const Error& e) {
    std::cerr << "error";
    if (!e.stage().empty()) std::cerr << " [" << e.stage() << "]";
    std::cerr << " (" << error_kind_name(e.kind()) << "): " << e.what()
              << "\n";
    rc = e.kind() == ErrorKind::kConfig ? kExitUsage : kExitStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    rc = kExitStageFailure;
  }
  return rc;
}

}  // namespace cbasr
