#pragma once

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace uvsplat {

enum class ErrorCode {
  invalid_config,
  invalid_mesh,
  zero_normal,
  overlapping_charts,
  empty_scan,
  level_mismatch,
  degenerate_quaternion,
  incomplete_maps,
  shape_mismatch,
  count_mismatch,
  non_finite_loss,
  io_error,
  missing_input,
  parse_error,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

  // Validation errors are bad inputs/configs; everything else is a runtime failure.
  bool is_validation() const {
    switch (code_) {
      case ErrorCode::invalid_config:
      case ErrorCode::invalid_mesh:
      case ErrorCode::overlapping_charts:
      case ErrorCode::empty_scan:
      case ErrorCode::level_mismatch:
      case ErrorCode::incomplete_maps:
      case ErrorCode::shape_mismatch:
      case ErrorCode::count_mismatch:
      case ErrorCode::missing_input:
      case ErrorCode::parse_error:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

int thread_count();
void set_thread_count(int n);

namespace detail {

template <typename F>
void run_chunked(int64_t chunk_count, F&& body) {
  const int workers = std::min<int64_t>(thread_count(), chunk_count);
  if (workers <= 1) {
    for (int64_t k = 0; k < chunk_count; ++k) body(k);
    return;
  }
  std::atomic<int64_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int64_t k = next.fetch_add(1, std::memory_order_relaxed);
        if (k >= chunk_count) return;
        body(k);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

// Runs fn(chunk_index, begin, end) over fixed-size index chunks. Chunk
// boundaries depend only on n and chunk_size, never on the thread count, so
// callers can merge per-chunk results in chunk order and stay deterministic
// across thread counts.
template <typename F>
void parallel_chunks(int64_t n, int64_t chunk_size, F&& fn) {
  if (n <= 0) return;
  if (chunk_size <= 0) chunk_size = 1;
  const int64_t chunk_count = (n + chunk_size - 1) / chunk_size;
  detail::run_chunked(chunk_count, [&](int64_t k) {
    const int64_t begin = k * chunk_size;
    const int64_t end = std::min<int64_t>(begin + chunk_size, n);
    fn(k, begin, end);
  });
}

// Element-parallel loop; each index is written by exactly one worker.
template <typename F>
void parallel_for(int64_t n, F&& fn) {
  const int64_t chunk = std::max<int64_t>(int64_t(1), n / (int64_t(thread_count()) * 8));
  parallel_chunks(n, chunk, [&](int64_t, int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace uvsplat
