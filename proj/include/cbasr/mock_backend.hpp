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

#ifndef CBASR_MOCK_BACKEND_HPP_
#define CBASR_MOCK_BACKEND_HPP_

#include <map>
#include <string>
#include <vector>

#include "cbasr/backend.hpp"

namespace cbasr {

// Deterministic mock stack. Every downstream example is exactly computable
// from three rules:
//   - mock_tts maps each character to a 0.1 s waveform keyed by codepoint;
//   - the encoder emits, per 0.1 s frame, the unit basis vector
//     e_{codepoint mod 16} replicated across the requested layers;
//   - the decoder echoes the character sequence, substituting through a
//     confusion table unless the surrounding word appears in the prompt.

constexpr int kMockSamplesPerChar = 1600;  // 0.1 s at 16 kHz
constexpr int kMockHiddenDim = 16;
constexpr int kMockNumLayers = 24;
constexpr double kMockFrameDuration = 0.1;

// Synthesizes the mock waveform for a character sequence. The codepoint is
// recoverable from each 0.1 s block, so encoder and decoder agree on the
// character stream without sharing state.
AudioBuffer mock_tts(const std::string& text);

// Recovers the character sequence from a mock waveform. Blocks that do not
// carry the mock marker decode to U+FFFD.
std::string mock_tts_decode(const AudioBuffer& audio);

// Basis-vector index for a character: codepoint mod 16.
int mock_basis_index(char32_t cp);

class MockBackend : public AsrBackend {
 public:
  // conf_table maps one character to its misrecognized form, mirroring the
  // kind of entity errors a real decoder makes. A prompt that contains the
  // correct word (>= 2 characters around the confused position) suppresses
  // the substitution.
  enum class DecodeRig {
    kNone,
    kRepeatWhenPrompted,  // test rig: degenerate repetition on prompted decode
  };

  explicit MockBackend(std::map<char32_t, char32_t> conf_table = {},
                       DecodeRig rig = DecodeRig::kNone)
      : confusion_(std::move(conf_table)), rig_(rig) {}

  LayerStack encode(const AudioBuffer& audio,
                    const std::vector<int>& layers) const override;
  Transcript decode(const AudioBuffer& audio,
                    const DecodeParams& params) const override;
  BackendInfo info() const override;

 private:
  std::map<char32_t, char32_t> confusion_;
  DecodeRig rig_;
};

// Wraps any backend and counts encode/decode calls. Pipeline tests assert
// the encode-once and single-fallback contracts with it.
class CountingBackend : public AsrBackend {
 public:
  explicit CountingBackend(const AsrBackend& inner) : inner_(inner) {}

  LayerStack encode(const AudioBuffer& audio,
                    const std::vector<int>& layers) const override {
    ++encode_calls_;
    return inner_.encode(audio, layers);
  }
  Transcript decode(const AudioBuffer& audio,
                    const DecodeParams& params) const override {
    ++decode_calls_;
    return inner_.decode(audio, params);
  }
  BackendInfo info() const override { return inner_.info(); }

  int encode_calls() const { return encode_calls_; }
  int decode_calls() const { return decode_calls_; }
  void reset_counts() { encode_calls_ = 0; decode_calls_ = 0; }

 private:
  const AsrBackend& inner_;
  mutable int encode_calls_ = 0;
  mutable int decode_calls_ = 0;
};

}  // namespace cbasr

#endif  // CBASR_MOCK_BACKEND_HPP_
