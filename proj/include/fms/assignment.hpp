#pragma once
// Exact minimum-cost linear assignment (Hungarian algorithm with row/column
// potentials, O(n^3)).

#include <cstdint>
#include <vector>

namespace fms {

// cost is a row-major n x n matrix; returns assign[row] = column.
std::vector<int64_t> solve_assignment(const std::vector<double>& cost, int64_t n);

}  // namespace fms
