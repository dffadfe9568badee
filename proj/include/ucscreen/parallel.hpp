#pragma once

#include <functional>

namespace ucscreen {

// Applies fn(i) for i in [0, n) across up to `threads` workers. Results must
// be written into index-addressed storage by the callee, so the outcome is
// independent of scheduling. threads <= 1 runs serially on the caller's
// thread; 0 picks a hardware default.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// Resolves 0 -> hardware default, honoring the UCSCREEN_THREADS env var.
int resolve_threads(int requested);

}  // namespace ucscreen
