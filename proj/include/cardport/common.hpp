#pragma once

#include <limits>
#include <vector>

namespace cardport {

/// Sorted, duplicate-free list of 0-based asset indices.
using IndexSet = std::vector<int>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace cardport
