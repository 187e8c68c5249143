#include "dsnet/tensor.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dsnet {

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t checked_element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d != 0 && n > std::numeric_limits<std::size_t>::max() / d) {
      throw SizeError("element count of shape " + to_string(shape) + " overflows");
    }
    n *= d;
  }
  return n;
}

Shape row_major_strides(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int threads) {
#ifdef _OPENMP
  g_threads = threads < 1 ? 1 : threads;
#else
  (void)threads;
  g_threads = 1;
#endif
}

int num_threads() noexcept { return g_threads.load(std::memory_order_relaxed); }

}  // namespace dsnet
