#pragma once

#include <cstddef>
#include <functional>

namespace csr {

// Runs fn(0..n-1) on up to `jobs` threads. Each index must write only its own
// output slot; results are therefore independent of the job count. After a
// failure no new indices start, and the lowest-index exception is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace csr
