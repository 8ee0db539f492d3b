#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace hsiscale {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{0};
  return cap;
}
}  // namespace detail

/// Caps the number of worker threads used by data-parallel loops. 0 restores
/// the default (HSI_SCALE_THREADS if set, else the logical core count).
inline void set_thread_count(unsigned n) { detail::thread_cap() = n; }

inline unsigned thread_count() {
  unsigned cap = detail::thread_cap();
  if (cap > 0) return cap;
  if (const char* env = std::getenv("HSI_SCALE_THREADS")) {
    try {
      long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n). Work items are independent, so the result does
/// not depend on the schedule; the first exception thrown is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(body);
    body();
  }
  if (error) std::rethrow_exception(error);
}

/// Splits [0, n) into fixed-size blocks, maps each block to a partial value in
/// parallel and folds the partials in block order. The block size does not
/// depend on the thread count, so results are bit-identical across schedules.
template <class T, class MapBlock, class Combine>
T parallel_reduce(std::size_t n, std::size_t block, T init, MapBlock&& map_block,
                  Combine&& combine) {
  block = std::max<std::size_t>(block, 1);
  const std::size_t blocks = (n + block - 1) / block;
  std::vector<T> partial(blocks, init);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t lo = b * block;
    const std::size_t hi = std::min(n, lo + block);
    partial[b] = map_block(lo, hi);
  });
  T acc = init;
  for (auto& p : partial) acc = combine(acc, p);
  return acc;
}

}  // namespace hsiscale
