#pragma once

#include <cstddef>
#include <functional>

namespace alens {

/// Worker count: hardware concurrency, capped by the ALENS_THREADS environment variable when set.
std::size_t thread_budget();

/**
 * Runs body(i) for i in [0, count) on up to thread_budget() threads. Callers
 * write results into pre-sized slots indexed by i, so output order never
 * depends on scheduling. If bodies throw, one of the exceptions is rethrown.
 */
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace alens
