#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace w2eps {

/// Worker count from W2EPS_WORKERS, defaulting to 1.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("W2EPS_WORKERS")) {
    try {
      const long w = std::stol(env);
      if (w > 0) return static_cast<std::size_t>(w);
    } catch (...) {
    }
  }
  return 1;
}

/// Runs body(begin, end) over contiguous chunks of [0, count).
///
/// Chunks write disjoint outputs, so results do not depend on the schedule.
template <class Body>
void parallel_for(std::size_t count, Body&& body, std::size_t workers = worker_count()) {
  workers = std::min(workers, count);
  if (workers <= 1) {
    body(std::size_t{0}, count);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
}

}  // namespace w2eps
