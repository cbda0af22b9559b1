#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace tplmon {

/// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads. Work is
/// handed out by index; the first exception (lowest index) is rethrown after
/// all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned max_threads = 0) {
  unsigned threads = max_threads ? max_threads : std::thread::hardware_concurrency();
  threads = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads - 1);
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Maps fn over [0, n) in parallel; results are ordered by index.
template <typename Fn>
auto parallel_map(std::size_t n, Fn&& fn, unsigned max_threads = 0) {
  using R = decltype(fn(std::size_t{}));
  std::vector<R> out(n);
  parallel_for(n, [&](std::size_t i) { out[i] = fn(i); }, max_threads);
  return out;
}

}  // namespace tplmon
