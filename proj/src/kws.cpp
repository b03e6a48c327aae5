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

#include "cbasr/kws.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>

#include <json.hpp>

#include "cbasr/error.hpp"
#include "cbasr/hash.hpp"
#include "cbasr/nn.hpp"

namespace cbasr {

using nlohmann::json;

SimilarityMap similarity_map(const LayerStack& entity,
                             const LayerStack& utterance) {
  if (entity.layers != utterance.layers || entity.dims != utterance.dims) {
    throw Error(ErrorKind::kCompatibility,
                "entity and utterance hidden states disagree (layers " +
                    format_layer_range(entity.layers) + " vs " +
                    format_layer_range(utterance.layers) + ", dims " +
                    std::to_string(entity.dims) + " vs " +
                    std::to_string(utterance.dims) + ")");
  }

  SimilarityMap out;
  out.channels = static_cast<int>(entity.layers.size());
  out.entity_frames = entity.frames;
  out.utterance_frames = utterance.frames;
  out.data.resize(static_cast<size_t>(out.channels) * out.entity_frames *
                  out.utterance_frames);

  const int dims = entity.dims;
  std::vector<double> entity_norm(entity.frames);
  std::vector<double> utt_norm(utterance.frames);
  for (int l = 0; l < out.channels; ++l) {
    for (int i = 0; i < entity.frames; ++i) {
      const float* v = entity.vec(l, i);
      double s = 0.0;
      for (int d = 0; d < dims; ++d) s += static_cast<double>(v[d]) * v[d];
      entity_norm[i] = std::sqrt(s);
    }
    for (int j = 0; j < utterance.frames; ++j) {
      const float* v = utterance.vec(l, j);
      double s = 0.0;
      for (int d = 0; d < dims; ++d) s += static_cast<double>(v[d]) * v[d];
      utt_norm[j] = std::sqrt(s);
    }
    for (int i = 0; i < entity.frames; ++i) {
      const float* ev = entity.vec(l, i);
      for (int j = 0; j < utterance.frames; ++j) {
        const float* uv = utterance.vec(l, j);
        double denom = entity_norm[i] * utt_norm[j];
        if (denom == 0.0) {
          out.at(l, i, j) = 0.0f;
          continue;
        }
        double dot = 0.0;
        for (int d = 0; d < dims; ++d) dot += static_cast<double>(ev[d]) * uv[d];
        out.at(l, i, j) = static_cast<float>(dot / denom);
      }
    }
  }
  return out;
}

BatchedMaps batch_prepare(std::span<const SimilarityMap> maps,
                          int entity_axis_target) {
  if (maps.empty()) throw Error(ErrorKind::kInput, "empty similarity-map batch");
  if (entity_axis_target < 1)
    throw Error(ErrorKind::kInput, "entity axis target must be >= 1");

  const int channels = maps[0].channels;
  int max_utt = 0;
  for (const auto& m : maps) {
    if (m.channels != channels) {
      throw Error(ErrorKind::kCompatibility,
                  "similarity maps in one batch must share a channel count");
    }
    if (m.entity_frames < 1 || m.utterance_frames < 1) {
      throw Error(ErrorKind::kInput, "degenerate similarity map in batch");
    }
    max_utt = std::max(max_utt, m.utterance_frames);
  }

  BatchedMaps out;
  out.count = static_cast<int>(maps.size());
  out.channels = channels;
  out.entity_axis = entity_axis_target;
  out.utterance_axis = max_utt;
  out.data.assign(static_cast<size_t>(out.count) * channels *
                      entity_axis_target * max_utt,
                  0.0f);
  out.utterance_frames.reserve(maps.size());

  for (size_t n = 0; n < maps.size(); ++n) {
    const SimilarityMap& m = maps[n];
    out.utterance_frames.push_back(m.utterance_frames);
    const int ef = m.entity_frames;
    for (int i = 0; i < entity_axis_target; ++i) {
      // Linear resize along the entity axis, endpoints aligned.
      double src;
      if (entity_axis_target == 1) {
        src = (ef - 1) / 2.0;
      } else {
        src = static_cast<double>(i) * (ef - 1) / (entity_axis_target - 1);
      }
      int i0 = static_cast<int>(src);
      int i1 = std::min(i0 + 1, ef - 1);
      double frac = src - i0;
      for (int c = 0; c < channels; ++c) {
        for (int j = 0; j < m.utterance_frames; ++j) {
          double v = m.at(c, i0, j) * (1.0 - frac) + m.at(c, i1, j) * frac;
          out.at(static_cast<int>(n), c, i, j) = static_cast<float>(v);
        }
      }
    }
  }
  return out;
}

const char* kws_architecture_name(KwsArchitecture arch) {
  switch (arch) {
    case KwsArchitecture::kResnet50: return "resnet50";
    case KwsArchitecture::kSmallCnn: return "small_cnn";
  }
  return "resnet50";
}

KwsArchitecture parse_kws_architecture(const std::string& name) {
  if (name == "resnet50") return KwsArchitecture::kResnet50;
  if (name == "small_cnn") return KwsArchitecture::kSmallCnn;
  throw Error(ErrorKind::kConfig, "unknown classifier architecture: " + name);
}

namespace {

void check_config(const ClassifierConfig& cfg) {
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.learning_rate <= 0 ||
      cfg.entity_axis_target < 1 || cfg.val_fraction < 0 ||
      cfg.val_fraction >= 1 || cfg.num_threads < 1) {
    throw Error(ErrorKind::kInput, "classifier hyperparameters must be positive");
  }
}

nn::Network build_network(KwsArchitecture arch, int channels, uint64_t seed) {
  switch (arch) {
    case KwsArchitecture::kSmallCnn: return nn::make_small_cnn(channels, seed);
    case KwsArchitecture::kResnet50: return nn::make_resnet50(channels, seed);
  }
  throw Error(ErrorKind::kInternal, "unreachable");
}

nn::Tensor to_tensor(const BatchedMaps& batch) {
  nn::Tensor t(batch.count, batch.channels, batch.entity_axis,
               batch.utterance_axis);
  t.v = batch.data;
  t.valid_w = batch.utterance_frames;
  return t;
}

constexpr char kCheckpointMagic[8] = {'C', 'B', 'K', 'W',
                                      'C', 'K', 'P', 'T'};

}  // namespace

struct KwsClassifier::Impl {
  ClassifierConfig cfg;
  int channels = 0;
  nn::Network net;
  // Layer forward passes cache activations inside the network, so scoring
  // serializes; callers stay free to run detection concurrently.
  std::mutex score_mu;

  std::vector<double> score_batch(std::span<const SimilarityMap> maps) {
    BatchedMaps batch = batch_prepare(maps, cfg.entity_axis_target);
    if (batch.channels != channels) {
      throw Error(ErrorKind::kCompatibility,
                  "classifier was trained on " + std::to_string(channels) +
                      " channels, maps have " +
                      std::to_string(batch.channels));
    }
    std::lock_guard<std::mutex> lock(score_mu);
    nn::set_num_threads(cfg.num_threads);
    nn::Tensor logits = net.forward(to_tensor(batch), /*train=*/false);
    std::vector<double> out(maps.size());
    for (size_t i = 0; i < maps.size(); ++i) {
      out[i] = static_cast<double>(logits.at(static_cast<int>(i), 1, 0, 0)) -
               static_cast<double>(logits.at(static_cast<int>(i), 0, 0, 0));
    }
    return out;
  }
};

KwsClassifier::KwsClassifier() : impl_(std::make_unique<Impl>()) {}
KwsClassifier::~KwsClassifier() = default;
KwsClassifier::KwsClassifier(KwsClassifier&&) noexcept = default;
KwsClassifier& KwsClassifier::operator=(KwsClassifier&&) noexcept = default;

const ClassifierConfig& KwsClassifier::config() const { return impl_->cfg; }
int KwsClassifier::channels() const { return impl_->channels; }

KwsClassifier KwsClassifier::train(std::span<const KwsSample> samples,
                                   const ClassifierConfig& cfg,
                                   TrainReport* report) {
  check_config(cfg);
  if (samples.empty()) throw Error(ErrorKind::kInput, "no training samples");

  std::vector<size_t> positives, negatives;
  const int channels = samples[0].map.channels;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].map.channels != channels) {
      throw Error(ErrorKind::kCompatibility,
                  "training maps must share a channel count");
    }
    (samples[i].positive ? positives : negatives).push_back(i);
  }
  if (positives.empty() || negatives.empty()) {
    throw Error(ErrorKind::kInput,
                "training data must contain both positive and negative "
                "samples (got " +
                    std::to_string(positives.size()) + " positive, " +
                    std::to_string(negatives.size()) + " negative)");
  }

  // Stratified split so the held-out set always carries both classes.
  std::mt19937_64 rng(derive_seed(cfg.seed, "kws-train-split"));
  std::shuffle(positives.begin(), positives.end(), rng);
  std::shuffle(negatives.begin(), negatives.end(), rng);
  auto split = [&](std::vector<size_t>& pool, std::vector<size_t>& train_out,
                   std::vector<size_t>& val_out) {
    size_t val_n = cfg.val_fraction > 0
                       ? std::max<size_t>(
                             1, static_cast<size_t>(pool.size() * cfg.val_fraction))
                       : 0;
    if (val_n >= pool.size()) val_n = pool.size() - 1;
    val_out.insert(val_out.end(), pool.begin(), pool.begin() + val_n);
    train_out.insert(train_out.end(), pool.begin() + val_n, pool.end());
  };
  std::vector<size_t> train_idx, val_idx;
  split(positives, train_idx, val_idx);
  split(negatives, train_idx, val_idx);

  KwsClassifier out;
  out.impl_->cfg = cfg;
  out.impl_->channels = channels;
  out.impl_->net =
      build_network(cfg.architecture, channels, derive_seed(cfg.seed, "kws-init"));
  nn::set_num_threads(cfg.num_threads);

  auto params = out.impl_->net.params();
  nn::Adam opt(cfg.learning_rate);

  auto eval_auc = [&]() -> double {
    if (val_idx.empty()) return 0.0;
    std::vector<std::pair<double, bool>> scored;
    scored.reserve(val_idx.size());
    for (size_t begin = 0; begin < val_idx.size();
         begin += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(val_idx.size(),
                            begin + static_cast<size_t>(cfg.batch_size));
      std::vector<SimilarityMap> maps;
      maps.reserve(end - begin);
      for (size_t k = begin; k < end; ++k) maps.push_back(samples[val_idx[k]].map);
      auto logits = out.impl_->score_batch(maps);
      for (size_t k = begin; k < end; ++k) {
        scored.push_back({logits[k - begin], samples[val_idx[k]].positive});
      }
    }
    return nn::auc(scored);
  };

  if (report != nullptr) {
    report->train_samples = train_idx.size();
    report->val_samples = val_idx.size();
  }

  std::mt19937_64 epoch_rng(derive_seed(cfg.seed, "kws-train-epochs"));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), epoch_rng);
    double loss_sum = 0.0;
    size_t batches = 0;
    for (size_t begin = 0; begin < train_idx.size();
         begin += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(train_idx.size(),
                            begin + static_cast<size_t>(cfg.batch_size));
      std::vector<SimilarityMap> maps;
      std::vector<int> labels;
      maps.reserve(end - begin);
      for (size_t k = begin; k < end; ++k) {
        maps.push_back(samples[train_idx[k]].map);
        labels.push_back(samples[train_idx[k]].positive ? 1 : 0);
      }
      BatchedMaps batch = batch_prepare(maps, cfg.entity_axis_target);
      nn::Tensor x = to_tensor(batch);
      opt.zero_grad(params);
      nn::Tensor logits = out.impl_->net.forward(x, /*train=*/true);
      nn::Tensor dlogits;
      loss_sum += nn::softmax_cross_entropy(logits, labels, &dlogits);
      out.impl_->net.backward(dlogits);
      opt.step(params);
      ++batches;
    }
    if (report != nullptr) {
      report->epoch_loss.push_back(batches > 0 ? loss_sum / batches : 0.0);
      report->epoch_val_auc.push_back(eval_auc());
    }
  }
  if (report != nullptr) {
    report->final_val_auc =
        report->epoch_val_auc.empty() ? 0.0 : report->epoch_val_auc.back();
  }
  return out;
}

std::vector<double> KwsClassifier::score(
    std::span<const SimilarityMap> maps) const {
  if (impl_->channels == 0) {
    throw Error(ErrorKind::kInput, "classifier is not trained or loaded");
  }
  if (maps.empty()) return {};
  // Scores are padding-invariant, so chunking cannot change results.
  std::vector<double> out;
  out.reserve(maps.size());
  const size_t chunk = static_cast<size_t>(impl_->cfg.batch_size);
  for (size_t begin = 0; begin < maps.size(); begin += chunk) {
    size_t end = std::min(maps.size(), begin + chunk);
    auto part = impl_->score_batch(maps.subspan(begin, end - begin));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

void KwsClassifier::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 4);

  json meta = {{"architecture", kws_architecture_name(impl_->cfg.architecture)},
               {"epochs", impl_->cfg.epochs},
               {"batch_size", impl_->cfg.batch_size},
               {"learning_rate", impl_->cfg.learning_rate},
               {"entity_axis_target", impl_->cfg.entity_axis_target},
               {"val_fraction", impl_->cfg.val_fraction},
               {"seed", impl_->cfg.seed},
               {"num_threads", impl_->cfg.num_threads},
               {"channels", impl_->channels}};
  std::string meta_str = meta.dump();
  uint32_t len = static_cast<uint32_t>(meta_str.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(meta_str.data(), len);
  impl_->net.save_params(out);
  if (!out) throw Error(ErrorKind::kIo, "short checkpoint write: " + path);
}

KwsClassifier KwsClassifier::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw Error(ErrorKind::kInput, path + " is not a classifier checkpoint");
  }
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1) {
    throw Error(ErrorKind::kCompatibility,
                "unsupported checkpoint version " + std::to_string(version));
  }
  uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  std::string meta_str(len, '\0');
  in.read(meta_str.data(), len);
  if (!in) throw Error(ErrorKind::kInput, "truncated checkpoint: " + path);

  KwsClassifier out;
  try {
    json meta = json::parse(meta_str);
    out.impl_->cfg.architecture =
        parse_kws_architecture(meta.at("architecture").get<std::string>());
    out.impl_->cfg.epochs = meta.at("epochs").get<int>();
    out.impl_->cfg.batch_size = meta.at("batch_size").get<int>();
    out.impl_->cfg.learning_rate = meta.at("learning_rate").get<double>();
    out.impl_->cfg.entity_axis_target = meta.at("entity_axis_target").get<int>();
    out.impl_->cfg.val_fraction = meta.at("val_fraction").get<double>();
    out.impl_->cfg.seed = meta.at("seed").get<uint64_t>();
    out.impl_->cfg.num_threads = meta.at("num_threads").get<int>();
    out.impl_->channels = meta.at("channels").get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInput,
                path + ": bad checkpoint metadata: " + e.what());
  }
  out.impl_->net = build_network(out.impl_->cfg.architecture,
                                 out.impl_->channels, /*seed=*/0);
  out.impl_->net.load_params(in);
  return out;
}

std::vector<KwsDecision> detect(const EntityDatabase& db,
                                const LayerStack& utterance,
                                const KwsClassifier& classifier,
                                double threshold) {
  if (utterance.layers != db.layer_range || utterance.dims != db.hidden_dim) {
    throw Error(ErrorKind::kCompatibility,
                "utterance hidden states do not match the entity database "
                "fingerprint (layers " +
                    format_layer_range(utterance.layers) + " vs " +
                    format_layer_range(db.layer_range) + ")");
  }

  std::vector<SimilarityMap> maps;
  maps.reserve(db.records.size());
  for (const auto& rec : db.records) {
    maps.push_back(similarity_map(rec.hidden, utterance));
  }
  std::vector<double> logits = classifier.score(maps);

  std::vector<KwsDecision> decisions;
  decisions.reserve(db.records.size());
  for (size_t i = 0; i < db.records.size(); ++i) {
    KwsDecision d;
    d.word = db.records[i].word;
    d.logit = logits[i];
    d.threshold = threshold;
    d.accepted = logits[i] >= threshold;
    decisions.push_back(std::move(d));
  }
  std::sort(decisions.begin(), decisions.end(),
            [](const KwsDecision& a, const KwsDecision& b) {
              if (a.logit != b.logit) return a.logit > b.logit;
              return a.word.normalized < b.word.normalized;
            });
  return decisions;
}

std::vector<PrCurvePoint> pr_curve(
    const std::vector<std::pair<double, bool>>& scored) {
  size_t total_pos = 0;
  for (const auto& [logit, label] : scored) {
    (void)logit;
    if (label) ++total_pos;
  }
  if (total_pos == 0) {
    throw Error(ErrorKind::kInput,
                "PR curve needs at least one positive label (recall is "
                "undefined otherwise)");
  }

  std::vector<double> thresholds;
  thresholds.reserve(scored.size());
  for (const auto& [logit, label] : scored) {
    (void)label;
    thresholds.push_back(logit);
  }
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  std::vector<PrCurvePoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    size_t tp = 0, fp = 0;
    for (const auto& [logit, label] : scored) {
      if (logit >= t) {
        if (label) ++tp;
        else ++fp;
      }
    }
    PrCurvePoint p;
    p.threshold_logit = t;
    p.threshold_prob = 1.0 / (1.0 + std::exp(-t));
    p.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 1.0;
    p.recall = static_cast<double>(tp) / total_pos;
    out.push_back(p);
  }
  return out;
}

}  // namespace cbasr
