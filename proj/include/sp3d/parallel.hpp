#pragma once

#include <cstdint>
#include <functional>

namespace sp3d {

// Deterministic data-parallel loop. The index range is split into contiguous
// chunks processed by a small worker pool; each index must write disjoint
// outputs, so results are bit-identical for any worker count.
void parallel_for(int64_t n, const std::function<void(int64_t begin, int64_t end)>& fn);

int thread_count();
void set_thread_count(int n);

}  // namespace sp3d
