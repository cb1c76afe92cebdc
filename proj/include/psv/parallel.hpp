#pragma once

#include <omp.h>

#include <cstddef>
#include <exception>
#include <mutex>

namespace psv {

/// Logical core count as seen by the OpenMP runtime.
inline int default_parallelism() { return omp_get_num_procs(); }

/// Runs body(i) for i in [0, n) on at most `max_in_flight` threads.
/// Each index is written by exactly one thread, so results stored by index
/// come out in deterministic order. The first exception is rethrown after
/// the loop drains.
template <class Body>
void parallel_for(std::size_t n, int max_in_flight, Body&& body) {
  if (n == 0) return;
  const int threads = max_in_flight > 0 ? max_in_flight : default_parallelism();
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Serial reference with the same contract.
template <class Body>
void serial_for(std::size_t n, Body&& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace psv
