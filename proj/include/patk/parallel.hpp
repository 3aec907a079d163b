#pragma once

#include <cstddef>
#include <functional>

namespace patk {

/// Worker count used by parallel_for. Defaults to PATK_NUM_THREADS or the
/// hardware concurrency.
int num_threads();
void set_num_threads(int n);

/// Runs body(k) for k in [0, n). Work items must write disjoint outputs;
/// callers that reduce do so afterwards in index order, which keeps results
/// independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace patk
