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

#ifndef CBASR_AUDIO_HPP_
#define CBASR_AUDIO_HPP_

#include <string>
#include <vector>

namespace cbasr {

constexpr int kCanonicalSampleRate = 16000;

struct AudioBuffer {
  std::vector<float> samples;  // mono PCM in [-1, 1]
  int sample_rate = kCanonicalSampleRate;

  double duration_s() const {
    return sample_rate > 0
               ? static_cast<double>(samples.size()) / sample_rate
               : 0.0;
  }
  bool empty() const { return samples.empty(); }
};

// Reads a mono WAV file (16-bit PCM or IEEE float32). Multichannel input is
// downmixed; anything not at 16 kHz is linearly resampled on load.
AudioBuffer read_wav(const std::string& path);

// Parses WAV bytes already in memory (same formats as read_wav).
AudioBuffer parse_wav(const std::string& bytes);

// Writes an IEEE float32 mono WAV. Float samples survive a round trip
// bit-exactly, which the TTS cache relies on.
void write_wav(const std::string& path, const AudioBuffer& audio);
std::string wav_bytes(const AudioBuffer& audio);

AudioBuffer resample_linear(const AudioBuffer& audio, int target_rate);

}  // namespace cbasr

#endif  // CBASR_AUDIO_HPP_
