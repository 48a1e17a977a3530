#pragma once

#include <vector>

namespace subtyper {

// Adjusted Rand index between two labelings of the same points; 1.0 means
// identical partitions up to relabeling, ~0 for independent ones.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace subtyper
