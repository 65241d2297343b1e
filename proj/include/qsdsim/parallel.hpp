#pragma once

#include <cstddef>
#include <functional>

namespace qsdsim {

/// Worker count used when callers pass 0.
std::size_t default_workers() noexcept;

/// Runs body(begin, end) over [0, n) split into contiguous chunks of at most
/// `grain` items. Chunks are claimed dynamically by up to `workers` threads;
/// the body must only write to per-index outputs so the result does not depend
/// on scheduling.
void parallel_chunks(std::size_t n, std::size_t grain, std::size_t workers,
                     const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace qsdsim
