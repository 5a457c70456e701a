#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string_view>
#include <thread>
#include <vector>

namespace halfcloud {

/// Thread count used when a caller passes 0: HALFCLOUD_THREADS if it holds a
/// positive integer, otherwise the hardware concurrency.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("HALFCLOUD_THREADS")) {
    std::string_view s(env);
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec == std::errc{} && ptr == s.data() + s.size() && value > 0) return value;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline unsigned resolve_threads(unsigned requested) { return requested == 0 ? default_thread_count() : requested; }

/// Calls body(begin, end) over contiguous chunks of [0, n). Chunk boundaries
/// depend only on n and the thread count, never on timing; callers that write
/// to per-index slots therefore get identical results for any thread count.
template <class Body>
void parallel_for_chunks(std::size_t n, unsigned threads, Body&& body) {
  threads = resolve_threads(threads);
  constexpr std::size_t kMinChunk = 256;
  const std::size_t workers = std::min<std::size_t>(threads, (n + kMinChunk - 1) / kMinChunk);
  if (workers <= 1) {
    if (n > 0) body(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    pool.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  parallel_for_chunks(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) body(i);
  });
}

}  // namespace halfcloud
