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

#ifndef CBASR_KWS_HPP_
#define CBASR_KWS_HPP_

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cbasr/backend.hpp"
#include "cbasr/entity_db.hpp"

namespace cbasr {

// Multi-channel cosine-similarity matrix between one entity's and one
// utterance's hidden states. A keyword occurrence shows up as a
// high-valued diagonal band, one channel per encoder layer.
struct SimilarityMap {
  int channels = 0;
  int entity_frames = 0;
  int utterance_frames = 0;
  std::vector<float> data;  // channels x entity_frames x utterance_frames

  float& at(int c, int i, int j) {
    return data[(static_cast<size_t>(c) * entity_frames + i) *
                    utterance_frames +
                j];
  }
  const float& at(int c, int i, int j) const {
    return data[(static_cast<size_t>(c) * entity_frames + i) *
                    utterance_frames +
                j];
  }
};

// data[l][i][j] = cos(entity layer l frame i, utterance layer l frame j).
// Zero vectors map to similarity 0 by convention, never NaN.
SimilarityMap similarity_map(const LayerStack& entity,
                             const LayerStack& utterance);

struct KwsSample {
  SimilarityMap map;
  bool positive = false;
  EntityWord word;
  std::string utterance_id;
};

// Batch layout expected by the classifier: the entity axis is resized
// (linear interpolation) to a fixed target, the utterance axis zero-padded
// to the batch maximum with a mask of real frames.
struct BatchedMaps {
  int count = 0;
  int channels = 0;
  int entity_axis = 0;
  int utterance_axis = 0;
  std::vector<float> data;           // N x C x E x U
  std::vector<int> utterance_frames;  // per-map real frame count

  bool mask(int n, int j) const { return j < utterance_frames[n]; }
  float& at(int n, int c, int i, int j) {
    return data[(((static_cast<size_t>(n) * channels + c) * entity_axis) + i) *
                    utterance_axis +
                j];
  }
  const float& at(int n, int c, int i, int j) const {
    return data[(((static_cast<size_t>(n) * channels + c) * entity_axis) + i) *
                    utterance_axis +
                j];
  }
};

BatchedMaps batch_prepare(std::span<const SimilarityMap> maps,
                          int entity_axis_target);

enum class KwsArchitecture { kResnet50, kSmallCnn };

const char* kws_architecture_name(KwsArchitecture arch);
KwsArchitecture parse_kws_architecture(const std::string& name);

struct ClassifierConfig {
  KwsArchitecture architecture = KwsArchitecture::kResnet50;
  int epochs = 6;
  int batch_size = 64;
  double learning_rate = 5e-5;
  int entity_axis_target = 32;
  double val_fraction = 0.1;
  uint64_t seed = 0;
  int num_threads = 2;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_val_auc;
  size_t train_samples = 0;
  size_t val_samples = 0;
  double final_val_auc = 0.0;
};

// Binary presence classifier over similarity maps. Scores are
// positive-class logit minus negative-class logit, so the acceptance
// threshold is invariant to a shared logit offset. A trained classifier is
// immutable; score() is safe for concurrent callers.
class KwsClassifier {
 public:
  KwsClassifier();
  ~KwsClassifier();
  KwsClassifier(KwsClassifier&&) noexcept;
  KwsClassifier& operator=(KwsClassifier&&) noexcept;

  static KwsClassifier train(std::span<const KwsSample> samples,
                             const ClassifierConfig& cfg,
                             TrainReport* report = nullptr);

  std::vector<double> score(std::span<const SimilarityMap> maps) const;

  void save(const std::string& path) const;
  static KwsClassifier load(const std::string& path);

  const ClassifierConfig& config() const;
  int channels() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

constexpr double kDefaultKwsThreshold = 10.0;

struct KwsDecision {
  EntityWord word;
  double logit = 0.0;
  bool accepted = false;
  double threshold = kDefaultKwsThreshold;
};

// Scores every database entity against the utterance. Decisions come back
// in descending logit order, so the accepted set is a prefix.
std::vector<KwsDecision> detect(const EntityDatabase& db,
                                const LayerStack& utterance,
                                const KwsClassifier& classifier,
                                double threshold = kDefaultKwsThreshold);

struct PrCurvePoint {
  double threshold_logit = 0.0;
  double threshold_prob = 0.0;  // softmax probability at the same cut
  double precision = 0.0;
  double recall = 0.0;
};

// One point per distinct logit, ascending by threshold; recall is
// non-increasing along the curve.
std::vector<PrCurvePoint> pr_curve(
    const std::vector<std::pair<double, bool>>& scored);

}  // namespace cbasr

#endif  // CBASR_KWS_HPP_
