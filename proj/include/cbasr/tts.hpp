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

#ifndef CBASR_TTS_HPP_
#define CBASR_TTS_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cbasr/audio.hpp"

namespace cbasr {

struct TtsRequest {
  std::string text;
  std::string voice;
  double rate = 1.0;  // speaking-rate multiplier
};

// Cache key: content hash of (text, voice, rate). Voice or rate changes
// never alias an existing entry.
std::string tts_cache_key(const TtsRequest& req);

class TtsClient {
 public:
  virtual ~TtsClient() = default;
  // Returns 16 kHz mono audio. Throws Error on failure.
  virtual AudioBuffer synthesize(const TtsRequest& req) = 0;
};

// Deterministic synthesis through the mock waveform codec; the voice and
// rate fields participate in cache keys but not in the audio.
class MockTtsClient : public TtsClient {
 public:
  AudioBuffer synthesize(const TtsRequest& req) override;
};

// POSTs {"text","voice","rate"} to <endpoint>/v1/synthesize and expects WAV
// bytes back. Endpoint override via CBASR_TTS_ENDPOINT.
class HttpTtsClient : public TtsClient {
 public:
  explicit HttpTtsClient(std::string endpoint, double timeout_s = 120.0);
  AudioBuffer synthesize(const TtsRequest& req) override;

  static const char* kEndpointEnvVar;

 private:
  std::string endpoint_;
  double timeout_s_;
};

struct RetryPolicy {
  int max_attempts = 3;
  double initial_backoff_s = 0.2;
  double backoff_multiplier = 2.0;
};

// Adds an on-disk WAV cache and bounded-backoff retries around any client.
// Layout: <cache_dir>/<first2hex>/<hash>.wav plus <hash>.json metadata.
// Cache writes go through a temp file + rename, so concurrent writers are
// safe and a hit returns bit-identical audio.
class CachingTtsClient : public TtsClient {
 public:
  CachingTtsClient(std::shared_ptr<TtsClient> inner, std::string cache_dir,
                   RetryPolicy retry = {});

  AudioBuffer synthesize(const TtsRequest& req) override;

  bool cached(const TtsRequest& req) const;
  std::string cache_path(const TtsRequest& req) const;

 private:
  std::shared_ptr<TtsClient> inner_;
  std::string cache_dir_;
  RetryPolicy retry_;
};

struct BatchItemFailure {
  size_t index = 0;
  std::string message;
};

struct TtsBatchResult {
  std::vector<AudioBuffer> buffers;  // index-aligned with the requests
  std::vector<BatchItemFailure> failures;

  bool ok(size_t index) const;
};

// Order-preserving batch synthesis over a bounded worker pool. Per-item
// failures are reported individually; the batch never aborts.
TtsBatchResult synthesize_batch(TtsClient& client,
                                const std::vector<TtsRequest>& reqs,
                                int parallelism);

struct CorpusUtterance;

// Resolves utterance audio: read audio_path when set, otherwise synthesize
// the transcript (the mock-stack path).
AudioBuffer utterance_audio(const CorpusUtterance& utt, TtsClient& tts,
                            const std::string& voice);

}  // namespace cbasr

#endif  // CBASR_TTS_HPP_
