#pragma once

#include <span>
#include <vector>

#include "avq/codebook.hpp"

namespace avq {

enum class EncodeMethod { greedy, beam, icm, exhaustive, pq };

// Per-stage surviving candidates; filled only when a trace pointer is passed
// to beam_encode. Test instrumentation for the score recurrence.
struct BeamTrace {
    struct Candidate {
        std::vector<code_t> prefix;
        double approx_sq_err;
    };
    std::vector<std::vector<Candidate>> stages;
};

// Norm-ordered beam search. Keeps the beam_width best partial codes per
// stage, scored by the recurrence
//   ||x - a - c||^2 = ||x - a||^2 + ||x - c||^2 - ||x||^2 + 2<c, a>
// with <c, a> accumulated from cross-term table lookups. Requires a codebook
// tagged norm-sorted. Ties break on the lexicographically smaller prefix.
std::vector<code_t> beam_encode(std::span<const float> x, const Codebook& cb,
                                const CrossTermTable& cross, std::size_t beam_width,
                                BeamTrace* trace = nullptr);

// Stage-wise nearest element on the running residual (classic RVQ encoding).
std::vector<code_t> greedy_encode(std::span<const float> x, const Codebook& cb);

// Coordinate descent from the given codes: cyclically re-optimizes one code
// with the others fixed until a full round changes nothing or rounds run out.
std::vector<code_t> icm_refine(std::span<const float> x, const Codebook& cb,
                               const CrossTermTable& cross, std::vector<code_t> codes,
                               std::size_t rounds);

// icm_refine from a greedy initialization.
std::vector<code_t> icm_encode(std::span<const float> x, const Codebook& cb,
                               const CrossTermTable& cross, std::size_t rounds);

// Global argmin over all k^m code combinations; refuses when k^m > 2^20.
// Ties resolve to the lexicographically smallest code.
std::vector<code_t> exhaustive_encode(std::span<const float> x, const Codebook& cb);

// Per-subspace nearest centroid for PQ-structured codebooks (dictionary m
// supported on the m-th contiguous d/m slice).
std::vector<code_t> pq_encode(std::span<const float> x, const Codebook& cb);

struct EncodeOptions {
    EncodeMethod method = EncodeMethod::beam;
    std::size_t beam_width = 10;
    std::size_t icm_rounds = 10;
};

// Encodes every vector and stores its cross term; parallel over vectors and
// independent of the worker-thread count.
EncodedDatabase encode_dataset(const VectorDataset& ds, const Codebook& cb,
                               const EncodeOptions& opt);

}  // namespace avq
