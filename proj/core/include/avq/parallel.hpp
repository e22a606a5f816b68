#pragma once

#include <cstddef>
#include <functional>

namespace avq {

// Process-wide cap on worker threads for data-parallel loops.
// 0 restores the default (hardware concurrency).
void set_max_threads(unsigned n);
unsigned max_threads();

namespace detail {

// Runs fn(chunk_index, begin, end) over fixed-size chunks of [0, n).
// Chunk boundaries depend only on n, never on the worker count, so a
// reduction indexed by chunk is reproducible across thread configurations.
void run_chunked(std::size_t n, std::size_t chunk_size,
                 const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

inline constexpr std::size_t kDefaultChunk = 1024;

}  // namespace detail

// Parallel loop over [0, n); fn(i) must only touch state owned by index i.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    detail::run_chunked(n, detail::kDefaultChunk,
                        [&](std::size_t, std::size_t begin, std::size_t end) {
                            for (std::size_t i = begin; i < end; ++i) fn(i);
                        });
}

// Parallel loop exposing the chunk index, for deterministic reductions:
// callers allocate one slot per chunk and combine slots in chunk order.
template <typename Fn>
void parallel_chunks(std::size_t n, Fn&& fn) {
    detail::run_chunked(n, detail::kDefaultChunk, std::forward<Fn>(fn));
}

inline std::size_t chunk_count(std::size_t n) {
    return (n + detail::kDefaultChunk - 1) / detail::kDefaultChunk;
}

}  // namespace avq
