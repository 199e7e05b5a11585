#pragma once

#include <cstdint>
#include <functional>

namespace muce::num {

// Worker count for batched kernels. 0 = auto (hardware concurrency, capped at 8,
// overridable through the MUCE_THREADS environment variable).
void set_num_threads(int n);
int num_threads();

// Runs fn over disjoint chunks [i0, i1) covering [0, n). Each index is handled by
// exactly one worker and every per-index computation is self-contained, so results
// are bit-identical to the serial loop for any worker count.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace muce::num
