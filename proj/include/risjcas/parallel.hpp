#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace risjcas {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is handled
// by exactly one worker, so writes into per-index slots are race free and the
// result does not depend on scheduling. The first exception (lowest index) is
// rethrown.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (n <= 0) return;
  const int workers = std::clamp(threads, 1, n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace risjcas
