#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace abuse {

/// Parallelism degree from ABUSE_PIPELINE_THREADS (default 1). Results of
/// every parallel section are independent of this value.
inline std::size_t configured_threads() {
  const char* value = std::getenv("ABUSE_PIPELINE_THREADS");
  if (value == nullptr || *value == '\0') return 1;
  char* end = nullptr;
  const long parsed = std::strtol(value, &end, 10);
  if (end == value || parsed < 1) return 1;
  return static_cast<std::size_t>(std::min(parsed, 256L));
}

/// Runs body(i) for i in [0, count) on up to `threads` workers with a static
/// interleaved schedule. Each index writes only to its own output slot, so
/// the aggregate is identical to the sequential loop. The first exception (by
/// index) is rethrown.
template <typename Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += threads) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& worker : workers) worker.join();
  for (auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
}

}  // namespace abuse
