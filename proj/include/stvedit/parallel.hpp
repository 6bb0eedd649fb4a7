#pragma once

#include <functional>

namespace stvedit {

// Process-wide worker count for the fork-join loops (0 = hardware threads).
// Work items must write disjoint data; results are then independent of the
// thread count, keeping outputs deterministic.
void set_num_threads(int n);
int num_threads();

void parallel_for(int n, const std::function<void(int)>& fn);

} // namespace stvedit
