#ifndef CBASR_TESTS_MOCK_DATA_HPP_
#define CBASR_TESTS_MOCK_DATA_HPP_

#include <random>
#include <string>
#include <vector>

#include "cbasr/kws.hpp"
#include "cbasr/mock_backend.hpp"
#include "cbasr/text.hpp"

namespace cbasr::testing {

// Small mock KWS training set: words embedded in filler text, negatives
// both random and prefix-confusable. Self-contained so module tests do not
// depend on dataset_gen.
inline std::vector<KwsSample> make_mock_samples(int target_count,
                                                uint32_t seed) {
  MockBackend backend;
  auto layer_range = default_layer_range();
  std::mt19937 rng(seed);

  // Wide character pool: mod-16 collision noise then matches arbitrary
  // Chinese text instead of clustering.
  auto random_word = [&](int len) {
    std::vector<char32_t> cps;
    for (int i = 0; i < len; ++i) {
      cps.push_back(0x4E00 + static_cast<char32_t>(rng() % 512));
    }
    return utf8_encode(cps);
  };

  std::vector<KwsSample> samples;
  int utt_index = 0;
  while (static_cast<int>(samples.size()) < target_count) {
    std::string word = random_word(2 + static_cast<int>(rng() % 3));
    std::string filler_a = random_word(2 + static_cast<int>(rng() % 4));
    std::string filler_b = random_word(2 + static_cast<int>(rng() % 4));
    std::string utterance_text = filler_a + word + filler_b;
    std::string utt_id = "u" + std::to_string(utt_index++);

    LayerStack utt = backend.encode(mock_tts(utterance_text), layer_range);

    auto add = [&](const std::string& w, bool positive) {
      if (w == word && !positive) return;
      KwsSample s;
      s.word.surface = w;
      s.word.normalized = w;
      s.positive = positive;
      s.utterance_id = utt_id;
      s.map = similarity_map(backend.encode(mock_tts(w), layer_range), utt);
      samples.push_back(std::move(s));
    };

    add(word, true);
    std::string rand_neg = random_word(2 + static_cast<int>(rng() % 3));
    while (utterance_text.find(rand_neg) != std::string::npos) {
      rand_neg = random_word(2 + static_cast<int>(rng() % 3));
    }
    add(rand_neg, false);
    // Confusing negative: shares the word's prefix, different tail.
    std::string confusing = word.substr(0, word.size() - 3) + random_word(1);
    if (utterance_text.find(confusing) == std::string::npos) {
      add(confusing, false);
    }
  }
  samples.resize(target_count);
  return samples;
}

inline ClassifierConfig desk_classifier_config(uint64_t seed) {
  ClassifierConfig cfg;
  cfg.architecture = KwsArchitecture::kSmallCnn;
  cfg.epochs = 4;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-3;
  cfg.entity_axis_target = 32;
  cfg.seed = seed;
  return cfg;
}

}  // namespace cbasr::testing

#endif  // CBASR_TESTS_MOCK_DATA_HPP_
