#pragma once

// Deterministic fan-out over simulation lanes. Results depend only on the lane
// count (each lane owns stream_id = lane index); the number of OS threads only
// changes wall time. Outputs come back in lane order.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "inertdrift/error.hpp"

namespace inertdrift {

/// Worker-lane count, overridable through INERTDRIFT_WORKERS.
inline std::size_t resolve_workers(std::size_t configured) {
  if (const char* env = std::getenv("INERTDRIFT_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    require(end != env && *end == '\0' && v >= 1, errc::config, "INERTDRIFT_WORKERS must be a positive integer");
    return static_cast<std::size_t>(v);
  }
  return configured == 0 ? 1 : configured;
}

/// Runs fn(lane) for lane in [0, lanes) on up to `threads` threads (0 = hardware
/// concurrency) and returns the results indexed by lane.
template <class Fn>
auto run_lanes(std::size_t lanes, Fn&& fn, std::size_t threads = 0) {
  using Result = decltype(fn(std::size_t{0}));
  std::vector<Result> out(lanes);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, lanes);
  if (threads <= 1) {
    for (std::size_t i = 0; i < lanes; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < lanes; i = next++) {
        try {
          out[i] = fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Splits `total` work items over `lanes` lanes: the first total % lanes lanes get one extra.
inline std::uint64_t lane_share(std::uint64_t total, std::size_t lanes, std::size_t lane) {
  return total / lanes + (lane < total % lanes ? 1 : 0);
}

}  // namespace inertdrift
