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

#ifndef CBASR_REMOTE_BACKEND_HPP_
#define CBASR_REMOTE_BACKEND_HPP_

#include <memory>
#include <string>
#include <vector>

#include "cbasr/backend.hpp"

namespace cbasr {

// Adapter for a Whisper-family model served out of process (the model
// itself is too heavy to embed). Protocol:
//
//   GET  /v1/info
//        -> {"model_id","num_encoder_layers","hidden_dim","frame_duration_s"}
//   POST /v1/encode?sample_rate=16000&layers=10,11,...
//        body: float32le mono samples
//        -> one JSON header line {"layers":[...],"frames":N,"dims":D,
//           "frame_duration_s":x} + "\n" + float32le tensor (layers*frames*dims)
//   POST /v1/decode
//        body: {"samples_b64","sample_rate","beam_size","language","prompt"?}
//        -> {"text","avg_logprob"}
//
// Servers may return the full padded encoder window; encode() crops the
// frames to ceil(duration / frame_duration_s). The base URL comes from the
// config, overridable through CBASR_MODEL_ENDPOINT.
class RemoteBackend : public AsrBackend {
 public:
  // Fetches /v1/info eagerly; a backend that cannot report its geometry is
  // an error, never a default.
  explicit RemoteBackend(const std::string& base_url,
                         double timeout_s = 300.0);
  ~RemoteBackend() override;

  LayerStack encode(const AudioBuffer& audio,
                    const std::vector<int>& layers) const override;
  Transcript decode(const AudioBuffer& audio,
                    const DecodeParams& params) const override;
  BackendInfo info() const override;

  static const char* kEndpointEnvVar;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cbasr

#endif  // CBASR_REMOTE_BACKEND_HPP_
