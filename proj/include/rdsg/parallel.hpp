#pragma once

#include <cstddef>
#include <functional>

namespace rdsg {

/// Worker count: RDSG_WORKERS if set, otherwise min(hardware threads, 4).
int default_workers();

/// Set the process-wide worker count used by parallel_for (<= 0 restores the default).
void set_workers(int n);
int workers();

/// Runs body(begin, end, chunk) over contiguous chunks of [0, n), chunk < min(chunks, n).
/// Chunk boundaries depend only on n and the chunk count, never on timing, so
/// per-chunk accumulators merged in chunk order give reproducible sums.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t, int)>& body,
                  int chunks = 0);

}  // namespace rdsg
