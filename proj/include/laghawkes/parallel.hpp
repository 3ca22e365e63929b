#pragma once

#include <cstddef>
#include <functional>

namespace laghawkes {

/// Worker count used by batch loops. Resolution order: set_thread_count(),
/// the LAGHAWKES_THREADS environment variable, then hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Runs f(i) for i in [0, n), chunked over thread_count() workers.
/// Results must be written to disjoint slots; reductions over the slots
/// are the caller's job so that summation order stays fixed.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace laghawkes
