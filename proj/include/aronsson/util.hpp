#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace aronsson {

/// Worker count for parallel assembly loops. Reads ARONSSON_THREADS once;
/// defaults to 1 (fully deterministic reductions).
int thread_count();

/// Chunked parallel loop over [0, n). With k workers the range is split into
/// k contiguous chunks; `body(chunk_index, begin, end)` runs once per chunk.
/// Chunk boundaries depend only on n and the worker count, so per-chunk
/// reductions can be combined in a fixed order.
void parallel_chunks(int n, const std::function<void(int, int, int)>& body);

/// FNV-1a 64-bit hash of a byte string, as a fixed-width hex string.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace aronsson
