#include "fms/assignment.hpp"

#include <limits>
#include <stdexcept>

namespace fms {

std::vector<int64_t> solve_assignment(const std::vector<double>& cost, int64_t n) {
  if (n == 0) return {};
  if (static_cast<int64_t>(cost.size()) != n * n)
    throw std::invalid_argument("solve_assignment: cost matrix size mismatch");

  const double kInf = std::numeric_limits<double>::infinity();
  // 1-indexed potentials; p[j] = row matched to column j.
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int64_t> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);

  for (int64_t i = 1; i <= n; ++i) {
    p[0] = i;
    int64_t j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int64_t i0 = p[static_cast<size_t>(j0)];
      double delta = kInf;
      int64_t j1 = 0;
      for (int64_t j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost[static_cast<size_t>((i0 - 1) * n + (j - 1))] -
                           u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int64_t j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int64_t j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  std::vector<int64_t> assign(static_cast<size_t>(n), -1);
  for (int64_t j = 1; j <= n; ++j)
    if (p[static_cast<size_t>(j)] > 0)
      assign[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
  return assign;
}

}  // namespace fms
