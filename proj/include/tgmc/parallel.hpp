#pragma once

#include "tgmc/errors.hpp"
#include "tgmc/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace tgmc {

/// Deterministic assignment of seeds to samples. Samples are grouped into
/// fixed-size shards; shard i is stream i with seed mix64(master_seed, i),
/// and sample j inside it uses mix64(stream_seed, j). The plan does not
/// depend on the number of workers.
struct StreamPlan {
  std::uint64_t master_seed = 0;
  std::size_t samples = 0;
  std::size_t shard_size = 256;

  std::size_t shard_count() const {
    return shard_size == 0 ? 0 : (samples + shard_size - 1) / shard_size;
  }
  std::size_t shard_begin(std::size_t shard) const { return shard * shard_size; }
  std::size_t shard_end(std::size_t shard) const {
    return std::min(samples, (shard + 1) * shard_size);
  }
  std::uint64_t stream_seed(std::size_t shard) const { return mix64(master_seed, shard); }
  std::uint64_t sample_seed(std::size_t global_index) const {
    return mix64(stream_seed(global_index / shard_size), global_index % shard_size);
  }
  void validate() const {
    if (shard_size == 0) throw InvalidArgument("shard_size must be >= 1");
  }
};

/// Runs task(shard) for every shard in [first, last) on up to `workers`
/// threads. Shards are claimed dynamically; the task must only write state
/// owned by its shard. If tasks throw, the exception of the lowest failing
/// shard is rethrown after all threads join.
inline void for_each_shard(std::size_t first, std::size_t last, int workers,
                           const std::function<void(std::size_t)>& task) {
  if (workers < 1) throw InvalidArgument("workers must be >= 1");
  if (first >= last) return;
  std::atomic<std::size_t> next{first};
  std::mutex err_mutex;
  std::exception_ptr error;
  std::size_t error_shard = last;
  std::atomic<bool> failed{false};

  auto loop = [&] {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      const std::size_t s = next.fetch_add(1);
      if (s >= last) return;
      try {
        task(s);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (s < error_shard) {
          error_shard = s;
          error = std::current_exception();
        }
        failed = true;
      }
    }
  };

  const auto n_threads = static_cast<std::size_t>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), last - first));
  if (n_threads <= 1) {
    loop();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(loop);
  }
  if (error) std::rethrow_exception(error);
}

/// results[g] = fn(g, plan.sample_seed(g)) for every sample, computed on
/// `workers` threads. The output is independent of the worker count.
template <class T, class Fn>
std::vector<T> parallel_map(const StreamPlan& plan, int workers, Fn&& fn) {
  plan.validate();
  std::vector<T> results(plan.samples);
  for_each_shard(0, plan.shard_count(), workers, [&](std::size_t shard) {
    for (std::size_t g = plan.shard_begin(shard); g < plan.shard_end(shard); ++g) {
      results[g] = fn(g, plan.sample_seed(g));
    }
  });
  return results;
}

}  // namespace tgmc
