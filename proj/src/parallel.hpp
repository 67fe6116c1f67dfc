#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mftraj::detail {

/// Splits [0, count) into `workers` contiguous chunks and runs
/// `body(worker, index)` for every index, one thread per chunk. The chunking
/// depends only on (count, workers), so per-worker accumulation stays
/// reproducible. The first exception (by worker order) is rethrown.
template <typename Body>
void parallel_for(std::size_t count, int workers, Body&& body) {
  const std::size_t w = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(count, 1));
  if (w == 1) {
    for (std::size_t i = 0; i < count; ++i) body(std::size_t{0}, i);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> threads;
  threads.reserve(w);
  for (std::size_t k = 0; k < w; ++k) {
    const std::size_t begin = count * k / w, end = count * (k + 1) / w;
    threads.emplace_back([&, k, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(k, i);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Number of chunks parallel_for uses for (count, workers).
inline std::size_t worker_count(std::size_t count, int workers) {
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(count, 1));
}

}  // namespace mftraj::detail
