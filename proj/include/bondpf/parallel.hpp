#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bondpf {

/// Particles are processed in fixed-size chunks so that every floating-point
/// reduction sees the same operand blocks whatever the worker count.
inline constexpr std::size_t kChunkSize = 256;

/// Calls fn(begin, end) over [0, n) in chunks of kChunkSize, spread over
/// `workers` threads (inline when workers <= 1). Rethrows the first exception.
template <class Fn>
void for_each_chunk(std::size_t n, unsigned workers, Fn&& fn) {
  const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
  auto run = [&](std::size_t c) { fn(c * kChunkSize, std::min(n, (c + 1) * kChunkSize)); };
  if (workers <= 1 || chunks <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    const auto count = static_cast<std::size_t>(std::min<std::size_t>(workers, chunks));
    pool.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < chunks; c = next++) {
          try {
            run(c);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace bondpf
