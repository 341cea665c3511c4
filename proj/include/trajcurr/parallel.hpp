#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace trajcurr {

/// Runs fn(i) for i in [0, n). Work is chunked over hardware threads; each
/// index must write only to its own output slot, so the result is identical
/// to the serial loop regardless of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  unsigned workers = std::thread::hardware_concurrency();
  if (workers <= 1 || n < 2 * workers) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (workers > n) workers = static_cast<unsigned>(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace trajcurr
