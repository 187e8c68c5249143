#pragma once

#include <cstddef>
#include <cstdint>

namespace dsnet {

// Caps the number of worker threads used by the numeric kernels. 1 disables
// threading. Kernels only parallelize over disjoint output ranges and reduce
// in index order, so results do not depend on this value.
void set_num_threads(int threads);
int num_threads() noexcept;

template <typename Fn>
void parallel_for(std::int64_t count, Fn&& fn) {
  const int threads = num_threads();
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1 && count > 1)
  for (std::int64_t i = 0; i < count; ++i) {
    fn(i);
  }
}

}  // namespace dsnet
