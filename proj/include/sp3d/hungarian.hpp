#pragma once

#include <utility>
#include <vector>

#include "sp3d/tensor.hpp"

namespace sp3d {

// Optimal min-cost assignment on a (P, Q) cost matrix; returns min(P, Q)
// (row, col) pairs. Rectangular inputs are padded to square with 10x the max
// finite entry and padded matches discarded. O(n^3), deterministic tie-breaks.
std::vector<std::pair<int, int>> hungarian_assign(const Tensor& cost);

}  // namespace sp3d
