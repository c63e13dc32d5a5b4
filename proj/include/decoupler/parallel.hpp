#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace decoupler {

/// Worker count actually used for a request; non-positive means all cores.
inline int resolveWorkers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Calls body(i) for i in [0, count), splitting the range into contiguous
/// chunks, one per worker. The first exception thrown is rethrown.
template <class Body>
void parallelFor(std::size_t count, int workers, Body&& body) {
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(resolveWorkers(workers)),
                                              std::max<std::size_t>(count, 1));
  if (w <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t k = 0; k < w; ++k) {
    const std::size_t lo = count * k / w;
    const std::size_t hi = count * (k + 1) / w;
    pool.emplace_back([&, k, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace decoupler
