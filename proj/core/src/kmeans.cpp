#include "avq/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "avq/numerics.hpp"
#include "avq/parallel.hpp"
#include "avq/rng.hpp"

namespace avq {

namespace {

// Assignment pass. Returns SSE; fills assignments and, when given, the
// per-point squared distance to the assigned centroid. Per-chunk partial sums
// are reduced in chunk order so the result is thread-count independent.
double assign_pass(const VectorDataset& data, const VectorDataset& centroids,
                   std::vector<std::uint32_t>& assignments, std::vector<double>* dist_out) {
    const std::size_t n = data.n;
    const std::size_t k = centroids.n;
    const std::size_t d = data.d;
    assignments.resize(n);
    if (dist_out) dist_out->resize(n);

    std::vector<double> partial(chunk_count(n), 0.0);
    parallel_chunks(n, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        double sum = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            const float* x = data.row(i).data();
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double dist = detail::sq_l2_unchecked(x, centroids.row(c).data(), d);
                if (dist < best) {
                    best = dist;
                    arg = static_cast<std::uint32_t>(c);
                }
            }
            assignments[i] = arg;
            if (dist_out) (*dist_out)[i] = best;
            sum += best;
        }
        partial[chunk] = sum;
    });

    double sse = 0.0;
    for (double p : partial) sse += p;
    return sse;
}

// Mean update in 64-bit accumulation, then empty-cluster repair: each empty
// cluster takes the point currently farthest from its centroid, farthest
// first, each point used at most once.
void update_pass(const VectorDataset& data, const std::vector<std::uint32_t>& assignments,
                 const std::vector<double>& dists, VectorDataset& centroids) {
    const std::size_t k = centroids.n;
    const std::size_t d = data.d;
    std::vector<double> sums(k * d, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < data.n; ++i) {
        const std::uint32_t c = assignments[i];
        const float* x = data.row(i).data();
        double* acc = sums.data() + static_cast<std::size_t>(c) * d;
        for (std::size_t j = 0; j < d; ++j) acc[j] += x[j];
        ++counts[c];
    }

    std::vector<double> repair_dist;
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] > 0) {
            const double inv = 1.0 / static_cast<double>(counts[c]);
            float* out = centroids.row(c).data();
            const double* acc = sums.data() + c * d;
            for (std::size_t j = 0; j < d; ++j) out[j] = static_cast<float>(acc[j] * inv);
            continue;
        }
        if (repair_dist.empty()) repair_dist = dists;
        std::size_t far = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < data.n; ++i) {
            if (repair_dist[i] > best) {
                best = repair_dist[i];
                far = i;
            }
        }
        repair_dist[far] = -1.0;
        auto src = data.row(far);
        std::copy(src.begin(), src.end(), centroids.row(c).begin());
    }
}

VectorDataset kmeanspp_init(const VectorDataset& data, std::size_t k, std::uint64_t seed) {
    const std::size_t n = data.n;
    const std::size_t d = data.d;
    Rng rng(seed);
    VectorDataset centroids(k, d);
    std::vector<bool> chosen(n, false);

    auto place = [&](std::size_t c, std::size_t i) {
        auto src = data.row(i);
        std::copy(src.begin(), src.end(), centroids.row(c).begin());
        chosen[i] = true;
    };

    place(0, rng.index(n));

    std::vector<double> mindist(n, std::numeric_limits<double>::infinity());
    std::vector<double> partial(chunk_count(n), 0.0);
    for (std::size_t c = 1; c < k; ++c) {
        const float* last = centroids.row(c - 1).data();
        parallel_chunks(n, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
            double sum = 0.0;
            for (std::size_t i = begin; i < end; ++i) {
                const double dist = detail::sq_l2_unchecked(data.row(i).data(), last, d);
                if (dist < mindist[i]) mindist[i] = dist;
                sum += mindist[i];
            }
            partial[chunk] = sum;
        });
        double total = 0.0;
        for (double p : partial) total += p;

        if (total <= 0.0) {
            // All remaining mass sits on already-chosen positions; take the
            // first unchosen point for determinism.
            std::size_t next = 0;
            while (next < n && chosen[next]) ++next;
            place(c, next < n ? next : 0);
            continue;
        }
        const double r = rng.uniform() * total;
        double acc = 0.0;
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            acc += mindist[i];
            if (acc >= r) {
                pick = i;
                break;
            }
        }
        place(c, pick);
    }
    return centroids;
}

}  // namespace

AssignResult assign(const VectorDataset& data, const VectorDataset& centroids) {
    if (data.d != centroids.d) throw std::invalid_argument("assign: dimension mismatch");
    if (centroids.n == 0) throw std::invalid_argument("assign: no centroids");
    AssignResult result;
    result.sse = assign_pass(data, centroids, result.assignments, nullptr);
    return result;
}

KMeansResult kmeans_fit(const VectorDataset& data, const KMeansConfig& cfg,
                        const VectorDataset* warm_start) {
    if (data.n == 0) throw std::invalid_argument("kmeans_fit: empty data");
    if (cfg.k < 1) throw std::invalid_argument("kmeans_fit: k must be >= 1");
    if (cfg.k > data.n) throw std::invalid_argument("kmeans_fit: k exceeds point count");
    if (cfg.max_iters < 1) throw std::invalid_argument("kmeans_fit: max_iters must be >= 1");
    if (cfg.tol < 0.0) throw std::invalid_argument("kmeans_fit: tol must be >= 0");
    check_finite(data);
    if (warm_start) {
        if (warm_start->n != cfg.k || warm_start->d != data.d) {
            throw std::invalid_argument("kmeans_fit: warm start shape mismatch");
        }
        check_finite(*warm_start);
    }

    KMeansResult result;
    result.centroids = warm_start ? *warm_start : kmeanspp_init(data, cfg.k, cfg.seed);

    std::vector<double> dists;
    double sse = assign_pass(data, result.centroids, result.assignments, &dists);
    result.sse_trace.push_back(sse);

    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        update_pass(data, result.assignments, dists, result.centroids);
        const double next = assign_pass(data, result.centroids, result.assignments, &dists);
        result.sse_trace.push_back(next);
        const bool converged = next == 0.0 || sse - next < cfg.tol * sse;
        sse = next;
        if (converged) break;
    }

    result.sse = sse;
    return result;
}

}  // namespace avq
