#pragma once

#include <cstddef>
#include <functional>

namespace rdsmdr {

// Runs fn(i) for i in [0, count) on up to `threads` workers (<=1 means the
// calling thread). fn must only write state addressed by i; with that
// discipline, results are identical for any thread count. The first exception
// thrown by any worker is rethrown after all workers join.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

// Thread count resolution: 0 or negative -> hardware concurrency.
int resolve_threads(int requested);

}  // namespace rdsmdr
