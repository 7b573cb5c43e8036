#pragma once

#include <cstddef>
#include <functional>

namespace wdn {

/// Worker cap for intra-op parallelism. Defaults to WAVEDENOISE_THREADS when
/// set, otherwise 1.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs body(begin, end) over contiguous chunks of [0, n). Each index is
/// visited by exactly one chunk, so per-index results do not depend on the
/// thread count.
void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace wdn
