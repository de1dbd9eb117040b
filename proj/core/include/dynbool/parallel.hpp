#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dynbool {

/// Evaluates f(0..n-1) on `threads` workers and returns the results in index
/// order. Workers pull indices from a shared counter, so the schedule varies
/// but the output never does as long as f(i) depends on i alone.
template <class F>
auto map_replicas(std::size_t n, unsigned threads, F&& f) {
  using R = decltype(f(std::size_t{0}));
  std::vector<R> out(n);
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          out[i] = f(i);
        } catch (...) {
          std::lock_guard lk(err_mu);
          if (!err) err = std::current_exception();
          next = n;
        }
      }
    });
  }
  pool.clear();
  if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace dynbool
