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

#ifndef CBASR_PARALLEL_HPP_
#define CBASR_PARALLEL_HPP_

#include <atomic>
#include <thread>
#include <vector>

namespace cbasr {

// Runs fn(i) for i in [0, n) on a bounded worker pool. fn must capture its
// own output slot; exceptions must be handled inside fn.
template <typename Fn>
void parallel_for_indexed(size_t n, int workers, Fn&& fn) {
  if (n == 0) return;
  size_t pool_size = std::min<size_t>(static_cast<size_t>(std::max(workers, 1)), n);
  if (pool_size <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  auto work = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= n) break;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(pool_size);
  for (size_t w = 0; w < pool_size; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

}  // namespace cbasr

#endif  // CBASR_PARALLEL_HPP_
