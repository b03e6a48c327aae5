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

#ifndef CBASR_CLI_HPP_
#define CBASR_CLI_HPP_

#include <string>
#include <vector>

namespace cbasr {

// Entry point behind the cbasr binary; separated so tests can drive the
// CLI in-process. Exit codes: 0 success, 1 stage failure, 2 usage or
// config error.
int run_cli(const std::vector<std::string>& args);

}  // namespace cbasr

#endif  // CBASR_CLI_HPP_
