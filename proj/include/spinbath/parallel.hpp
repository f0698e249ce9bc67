// parallel.hpp: index-parallel loops capped by SPINBATH_THREADS.

#pragma once

#include <cstddef>
#include <functional>

namespace spinbath {

/// Worker count: SPINBATH_THREADS if set to a positive integer, else hardware concurrency.
int thread_count();

/// Run fn(i) for i in [0, n). Each index runs exactly once; fn must only write
/// state owned by its index. Exceptions are rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace spinbath
