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

#ifndef CBASR_ERROR_HPP_
#define CBASR_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <utility>

namespace cbasr {

enum class ErrorKind {
  kConfig,         // bad configuration (layer range, unknown backend, ...)
  kInput,          // invalid caller input (empty audio, duplicate words, ...)
  kCompatibility,  // fingerprint / shape mismatch between artifacts
  kTransport,      // network failure talking to an external service
  kService,        // external service answered but the answer is unusable
  kDecode,         // backend decoding failure
  kIo,             // file system failure
  kInternal
};

const char* error_kind_name(ErrorKind kind);

// All recoverable failures are reported as Error. `stage` identifies the
// pipeline stage that raised it when the error crosses module boundaries.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string stage = "")
      : std::runtime_error(message), kind_(kind), stage_(std::move(stage)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& stage() const { return stage_; }

  Error with_stage(const std::string& stage) const {
    return Error(kind_, what(), stage);
  }

 private:
  ErrorKind kind_;
  std::string stage_;
};

}  // namespace cbasr

#endif  // CBASR_ERROR_HPP_
