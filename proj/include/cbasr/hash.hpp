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

#ifndef CBASR_HASH_HPP_
#define CBASR_HASH_HPP_

#include <cstdint>
#include <string>

namespace cbasr {

// SHA-256 hex digest; keys the TTS cache and config hashes in manifests.
std::string sha256_hex(const std::string& data);

// Stable 64-bit mix used to derive per-stage seeds from one top-level seed.
uint64_t derive_seed(uint64_t root_seed, const std::string& stage);

}  // namespace cbasr

#endif  // CBASR_HASH_HPP_
