#pragma once

#include <cstdint>
#include <vector>

#include "avq/dataset.hpp"

namespace avq {

// Init is kmeans++ unless warm-start centroids are supplied to kmeans_fit.
struct KMeansConfig {
    std::size_t k = 1;
    std::size_t max_iters = 100;
    double tol = 1e-4;  // relative SSE improvement below which iteration stops
    std::uint64_t seed = 0;
};

struct KMeansResult {
    VectorDataset centroids;  // k x d
    std::vector<std::uint32_t> assignments;
    double sse = 0.0;
    std::vector<double> sse_trace;  // one entry per assignment pass, non-increasing
};

// Lloyd iterations with deterministic tie-breaking (lowest centroid index)
// and empty-cluster repair (re-seed to the point farthest from its centroid).
// Deterministic for a fixed seed, input and warm start, independent of the
// worker-thread count.
KMeansResult kmeans_fit(const VectorDataset& data, const KMeansConfig& cfg,
                        const VectorDataset* warm_start = nullptr);

struct AssignResult {
    std::vector<std::uint32_t> assignments;
    double sse = 0.0;
};

AssignResult assign(const VectorDataset& data, const VectorDataset& centroids);

}  // namespace avq
