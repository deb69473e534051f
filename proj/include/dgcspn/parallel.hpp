// Copyright 2026 The dgcspn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DGCSPN_PARALLEL_HPP_
#define DGCSPN_PARALLEL_HPP_

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace dgcspn {

/// Runs fn(worker, begin, end) over contiguous chunks of [0, n), one chunk
/// per worker. Callers merge per-worker results in worker order, which keeps
/// reductions deterministic for a fixed thread count. Exceptions thrown by a
/// worker are rethrown on the calling thread.
template <typename Fn>
void parallel_chunks(int n, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    const int begin = static_cast<int>(static_cast<long long>(n) * w / threads);
    const int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / threads);
    pool.emplace_back([&fn, &errors, w, begin, end] {
      try {
        fn(w, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Worker count actually used by parallel_chunks for n items.
inline int effective_threads(int n, int threads) { return std::max(1, std::min(threads, n)); }

}  // namespace dgcspn

#endif  // DGCSPN_PARALLEL_HPP_
