#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace ndhmc {

/// Runs task(i) for i in [0, n_tasks) on up to `workers` threads. Tasks are
/// claimed from a shared counter, so callers must write results into
/// per-index slots to keep output independent of scheduling. The first
/// exception thrown by a task is rethrown after all threads join.
void parallel_for(std::size_t n_tasks, std::size_t workers,
                  const std::function<void(std::size_t)>& task);

/// SplitMix64 finalizer; used to derive independent RNG stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Stable seed for stream `index` under a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace ndhmc
