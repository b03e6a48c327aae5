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

#include "cbasr/tts.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cbasr/error.hpp"
#include "cbasr/hash.hpp"
#include "cbasr/mock_backend.hpp"
#include "cbasr/storage.hpp"

namespace fs = std::filesystem;

namespace cbasr {

using nlohmann::json;

namespace {

std::string trimmed(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void check_request(const TtsRequest& req) {
  if (trimmed(req.text).empty())
    throw Error(ErrorKind::kInput, "TTS request text is empty");
  if (req.rate <= 0)
    throw Error(ErrorKind::kInput, "TTS rate must be positive");
}

}  // namespace

std::string tts_cache_key(const TtsRequest& req) {
  std::ostringstream content;
  content << "text=" << req.text << "\x1f"
          << "voice=" << req.voice << "\x1f"
          << "rate=" << req.rate;
  return sha256_hex(content.str());
}

AudioBuffer MockTtsClient::synthesize(const TtsRequest& req) {
  check_request(req);
  return mock_tts(req.text);
}

const char* HttpTtsClient::kEndpointEnvVar = "CBASR_TTS_ENDPOINT";

HttpTtsClient::HttpTtsClient(std::string endpoint, double timeout_s)
    : endpoint_(std::move(endpoint)), timeout_s_(timeout_s) {
  const char* env = std::getenv(kEndpointEnvVar);
  if (env != nullptr && env[0] != '\0') endpoint_ = env;
  if (endpoint_.empty()) {
    throw Error(ErrorKind::kConfig, "TTS endpoint not configured (set "
                                    "tts.endpoint or " +
                                        std::string(kEndpointEnvVar) + ")");
  }
}

AudioBuffer HttpTtsClient::synthesize(const TtsRequest& req) {
  check_request(req);
  httplib::Client cli(endpoint_);
  auto sec = static_cast<time_t>(timeout_s_);
  cli.set_connection_timeout(sec, 0);
  cli.set_read_timeout(sec, 0);
  cli.set_write_timeout(sec, 0);

  json body = {{"text", req.text}, {"voice", req.voice}, {"rate", req.rate}};
  auto res = cli.Post("/v1/synthesize", body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorKind::kTransport,
                "TTS request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorKind::kService, "TTS service returned HTTP " +
                                         std::to_string(res->status) + " " +
                                         res->body.substr(0, 200));
  }
  AudioBuffer audio = parse_wav(res->body);
  if (audio.empty())
    throw Error(ErrorKind::kService, "TTS service returned empty audio");
  return audio;
}

CachingTtsClient::CachingTtsClient(std::shared_ptr<TtsClient> inner,
                                   std::string cache_dir, RetryPolicy retry)
    : inner_(std::move(inner)), cache_dir_(std::move(cache_dir)),
      retry_(retry) {
  fs::create_directories(cache_dir_);
}

std::string CachingTtsClient::cache_path(const TtsRequest& req) const {
  std::string key = tts_cache_key(req);
  return (fs::path(cache_dir_) / key.substr(0, 2) / (key + ".wav")).string();
}

bool CachingTtsClient::cached(const TtsRequest& req) const {
  return fs::exists(cache_path(req));
}

AudioBuffer CachingTtsClient::synthesize(const TtsRequest& req) {
  check_request(req);
  const std::string wav_path = cache_path(req);
  if (fs::exists(wav_path)) return read_wav(wav_path);

  std::string last_error;
  double backoff = retry_.initial_backoff_s;
  for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    try {
      AudioBuffer audio = inner_->synthesize(req);
      if (audio.empty())
        throw Error(ErrorKind::kService, "synthesis produced empty audio");

      fs::path dir = fs::path(wav_path).parent_path();
      fs::create_directories(dir);
      // Temp-then-rename keeps concurrent writers from observing partial
      // files; identical content makes the race benign.
      fs::path tmp = wav_path + ".tmp." +
                     std::to_string(static_cast<unsigned>(
                         std::hash<std::thread::id>{}(
                             std::this_thread::get_id())));
      write_wav(tmp.string(), audio);
      fs::rename(tmp, wav_path);

      json meta = {{"text", req.text},
                   {"voice", req.voice},
                   {"rate", req.rate},
                   {"sample_rate", audio.sample_rate},
                   {"duration_s", audio.duration_s()}};
      fs::path meta_tmp = wav_path + ".json.tmp";
      {
        std::ofstream of(meta_tmp);
        of << meta.dump(2) << "\n";
      }
      fs::rename(meta_tmp,
                 fs::path(wav_path).replace_extension(".json"));
      return audio;
    } catch (const Error& e) {
      // Input errors will not improve on retry.
      if (e.kind() == ErrorKind::kInput) throw;
      last_error = e.what();
      if (attempt < retry_.max_attempts) {
        std::this_thread::sleep_for(
            std::chrono::duration<double>(backoff));
        backoff *= retry_.backoff_multiplier;
      }
    }
  }
  throw Error(ErrorKind::kTransport,
              "TTS failed after " + std::to_string(retry_.max_attempts) +
                  " attempts: " + last_error);
}

bool TtsBatchResult::ok(size_t index) const {
  for (const auto& f : failures) {
    if (f.index == index) return false;
  }
  return true;
}

AudioBuffer utterance_audio(const CorpusUtterance& utt, TtsClient& tts,
                            const std::string& voice) {
  if (!utt.audio_path.empty()) return read_wav(utt.audio_path);
  if (utt.transcript.empty()) {
    throw Error(ErrorKind::kInput,
                "utterance '" + utt.utterance_id +
                    "' has neither audio_path nor transcript");
  }
  return tts.synthesize({utt.transcript, voice, 1.0});
}

TtsBatchResult synthesize_batch(TtsClient& client,
                                const std::vector<TtsRequest>& reqs,
                                int parallelism) {
  if (parallelism < 1)
    throw Error(ErrorKind::kInput, "parallelism must be >= 1");

  TtsBatchResult result;
  result.buffers.resize(reqs.size());
  std::vector<std::optional<BatchItemFailure>> failures(reqs.size());

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= reqs.size()) break;
      try {
        result.buffers[i] = client.synthesize(reqs[i]);
      } catch (const std::exception& e) {
        failures[i] = BatchItemFailure{i, e.what()};
      }
    }
  };

  int workers = static_cast<int>(
      std::min<size_t>(static_cast<size_t>(parallelism), reqs.size()));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (auto& f : failures) {
    if (f.has_value()) result.failures.push_back(*f);
  }
  return result;
}

}  // namespace cbasr
