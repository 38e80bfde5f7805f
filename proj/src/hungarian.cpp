#include "sp3d/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sp3d {

std::vector<std::pair<int, int>> hungarian_assign(const Tensor& cost) {
  if (cost.numel() == 0) return {};
  if (cost.ndim() != 2) throw ShapeMismatch("hungarian cost must be 2d");
  const int p = static_cast<int>(cost.dim(0));
  const int q = static_cast<int>(cost.dim(1));
  const int n = std::max(p, q);

  double max_finite = 0.0;
  for (int64_t i = 0; i < cost.numel(); ++i)
    if (std::isfinite(cost[i])) max_finite = std::max(max_finite, std::abs(cost[i]));
  const double pad = 10.0 * std::max(max_finite, 1.0);

  std::vector<double> a(static_cast<size_t>(n) * n, pad);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < q; ++j)
      a[static_cast<size_t>(i) * n + j] = std::isfinite(cost.at(i, j)) ? cost.at(i, j) : pad;

  // Potentials + augmenting paths (Jonker-Volgenant style), 1-indexed.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
    std::vector<bool> used(static_cast<size_t>(n) + 1, false);
    do {
      used[static_cast<size_t>(j0)] = true;
      const int i0 = match[static_cast<size_t>(j0)];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = a[static_cast<size_t>(i0 - 1) * n + (j - 1)] - u[static_cast<size_t>(i0)] -
                           v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  std::vector<std::pair<int, int>> pairs;
  for (int j = 1; j <= n; ++j) {
    const int i = match[static_cast<size_t>(j)];
    if (i >= 1 && i <= p && j <= q) pairs.emplace_back(i - 1, j - 1);
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

}  // namespace sp3d
