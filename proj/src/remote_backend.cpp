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

#include "cbasr/remote_backend.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "cbasr/base64.hpp"
#include "cbasr/error.hpp"

namespace cbasr {

using nlohmann::json;

const char* RemoteBackend::kEndpointEnvVar = "CBASR_MODEL_ENDPOINT";

struct RemoteBackend::Impl {
  std::string base_url;
  double timeout_s;
  BackendInfo cached_info;

  httplib::Client make_client() const {
    httplib::Client cli(base_url);
    auto sec = static_cast<time_t>(timeout_s);
    auto usec = static_cast<time_t>((timeout_s - sec) * 1e6);
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);
    cli.set_write_timeout(sec, usec);
    return cli;
  }
};

namespace {

std::string resolve_base_url(const std::string& configured) {
  const char* env = std::getenv(RemoteBackend::kEndpointEnvVar);
  if (env != nullptr && env[0] != '\0') return env;
  return configured;
}

[[noreturn]] void raise_http(const std::string& what,
                             const httplib::Result& res) {
  if (!res) {
    throw Error(ErrorKind::kTransport,
                what + ": " + httplib::to_string(res.error()));
  }
  throw Error(ErrorKind::kService, what + ": HTTP " +
                                       std::to_string(res->status) + " " +
                                       res->body.substr(0, 200));
}

}  // namespace

RemoteBackend::RemoteBackend(const std::string& base_url, double timeout_s)
    : impl_(std::make_unique<Impl>()) {
  impl_->base_url = resolve_base_url(base_url);
  impl_->timeout_s = timeout_s;
  if (impl_->base_url.empty()) {
    throw Error(ErrorKind::kConfig, "model endpoint not configured (set "
                                    "backend.endpoint or " +
                                        std::string(kEndpointEnvVar) + ")");
  }

  auto cli = impl_->make_client();
  auto res = cli.Get("/v1/info");
  if (!res || res->status != 200) raise_http("model info request failed", res);
  try {
    json j = json::parse(res->body);
    impl_->cached_info.model_id = j.at("model_id").get<std::string>();
    impl_->cached_info.num_encoder_layers = j.at("num_encoder_layers").get<int>();
    impl_->cached_info.hidden_dim = j.at("hidden_dim").get<int>();
    impl_->cached_info.frame_duration_s = j.at("frame_duration_s").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kService,
                std::string("malformed /v1/info response: ") + e.what());
  }
  if (impl_->cached_info.num_encoder_layers <= 0 ||
      impl_->cached_info.hidden_dim <= 0 ||
      impl_->cached_info.frame_duration_s <= 0) {
    throw Error(ErrorKind::kService, "model server reported invalid geometry");
  }
}

RemoteBackend::~RemoteBackend() = default;

BackendInfo RemoteBackend::info() const { return impl_->cached_info; }

LayerStack RemoteBackend::encode(const AudioBuffer& audio,
                                 const std::vector<int>& layers) const {
  check_audio(audio);
  check_layers(layers, impl_->cached_info);

  std::ostringstream path;
  path << "/v1/encode?sample_rate=" << audio.sample_rate << "&layers=";
  for (size_t i = 0; i < layers.size(); ++i) {
    if (i) path << ",";
    path << layers[i];
  }

  std::string body(reinterpret_cast<const char*>(audio.samples.data()),
                   audio.samples.size() * sizeof(float));
  auto cli = impl_->make_client();
  auto res = cli.Post(path.str(), body, "application/octet-stream");
  if (!res || res->status != 200) raise_http("encode request failed", res);

  size_t newline = res->body.find('\n');
  if (newline == std::string::npos) {
    throw Error(ErrorKind::kService, "encode response missing header line");
  }

  LayerStack out;
  try {
    json hdr = json::parse(res->body.substr(0, newline));
    out.layers = hdr.at("layers").get<std::vector<int>>();
    out.frames = hdr.at("frames").get<int>();
    out.dims = hdr.at("dims").get<int>();
    out.frame_duration_s = hdr.at("frame_duration_s").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kService,
                std::string("malformed encode header: ") + e.what());
  }
  if (out.layers != layers) {
    throw Error(ErrorKind::kService,
                "encode response layer list does not match the request");
  }

  size_t expected =
      static_cast<size_t>(out.layers.size()) * out.frames * out.dims;
  size_t blob_bytes = res->body.size() - newline - 1;
  if (blob_bytes != expected * sizeof(float)) {
    throw Error(ErrorKind::kService,
                "encode tensor size mismatch: got " +
                    std::to_string(blob_bytes) + " bytes, want " +
                    std::to_string(expected * sizeof(float)));
  }
  out.data.resize(expected);
  std::memcpy(out.data.data(), res->body.data() + newline + 1,
              blob_bytes);

  // Servers typically encode a fixed padded window; keep only the frames
  // covering the real audio.
  int real_frames = static_cast<int>(
      std::ceil(audio.duration_s() / out.frame_duration_s));
  real_frames = std::max(1, std::min(real_frames, out.frames));
  if (real_frames < out.frames) {
    LayerStack cropped;
    cropped.layers = out.layers;
    cropped.frames = real_frames;
    cropped.dims = out.dims;
    cropped.frame_duration_s = out.frame_duration_s;
    cropped.data.resize(
        static_cast<size_t>(out.layers.size()) * real_frames * out.dims);
    for (size_t l = 0; l < out.layers.size(); ++l) {
      std::memcpy(cropped.vec(static_cast<int>(l), 0), out.vec(static_cast<int>(l), 0),
                  static_cast<size_t>(real_frames) * out.dims * sizeof(float));
    }
    return cropped;
  }
  return out;
}

Transcript RemoteBackend::decode(const AudioBuffer& audio,
                                 const DecodeParams& params) const {
  check_audio(audio);
  check_decode_params(params);

  json req;
  req["samples_b64"] = base64_encode(
      reinterpret_cast<const unsigned char*>(audio.samples.data()),
      audio.samples.size() * sizeof(float));
  req["sample_rate"] = audio.sample_rate;
  req["beam_size"] = params.beam_size;
  req["language"] = language_name(params.language);
  if (params.prompt.has_value() && !params.prompt->empty()) {
    req["prompt"] = *params.prompt;
  }

  auto cli = impl_->make_client();
  auto res = cli.Post("/v1/decode", req.dump(), "application/json");
  if (!res) {
    throw Error(ErrorKind::kTransport,
                "decode request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorKind::kDecode, "decode failed: HTTP " +
                                        std::to_string(res->status) + " " +
                                        res->body.substr(0, 200));
  }
  try {
    json j = json::parse(res->body);
    Transcript t;
    t.text = j.at("text").get<std::string>();
    t.avg_logprob = j.value("avg_logprob", 0.0);
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kService,
                std::string("malformed decode response: ") + e.what());
  }
}

}  // namespace cbasr
