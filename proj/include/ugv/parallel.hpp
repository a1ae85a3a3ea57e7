#ifndef UGV_PARALLEL_HPP
#define UGV_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace ugv {

// Worker count for batch loops: min(hardware threads, UGVKIT_THREADS if set).
// Always >= 1.
int worker_count();

// Runs fn(i) for i in [0, n). Each index is processed by exactly one worker,
// so results must not depend on the degree of parallelism as long as fn(i)
// writes only to index-i slots.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

} // namespace ugv

#endif // UGV_PARALLEL_HPP
