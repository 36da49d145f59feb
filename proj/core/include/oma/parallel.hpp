#pragma once

#include <cstddef>
#include <functional>

namespace oma {

/// Worker count for fan-out loops: min(hardware_concurrency, OMA_THREADS).
/// OMA_THREADS=1 forces single-threaded execution everywhere.
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Work items must be independent; each item
/// writes only its own output slot, so results do not depend on scheduling.
/// Executes inline when n is small or worker_count() == 1.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace oma
