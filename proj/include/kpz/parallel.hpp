#pragma once
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>
#include <algorithm>

namespace kpz {

// Samples are grouped into fixed blocks; workers claim whole blocks and the
// caller folds per-block results in block order, which keeps every estimate
// independent of worker count and scheduling.
inline constexpr int64_t kBlockSamples = 1024;

inline int available_workers() {
  if (const char* env = std::getenv("KPZTORUS_WORKERS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

// Run fn(block_index) for block_index in [0, n_blocks).  fn must write only
// to its own block's slot.  Exceptions are captured and rethrown once.
template <class Fn>
void run_blocks(int64_t n_blocks, int workers, Fn&& fn) {
  if (workers <= 1 || n_blocks <= 1) {
    for (int64_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  std::atomic<int64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::atomic_flag error_claimed = ATOMIC_FLAG_INIT;
  auto body = [&] {
    for (;;) {
      int64_t b = next.fetch_add(1, std::memory_order_relaxed);
      if (b >= n_blocks || failed.load(std::memory_order_relaxed)) return;
      try {
        fn(b);
      } catch (...) {
        if (!error_claimed.test_and_set()) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  int nt = static_cast<int>(std::min<int64_t>(workers, n_blocks));
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int i = 0; i < nt; ++i) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace kpz
