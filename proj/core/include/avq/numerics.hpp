#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "avq/dataset.hpp"

namespace avq {

// Orthonormal basis ordered by descending explained variance. The rotation
// is mean-free: callers that need centering subtract the mean themselves.
struct Rotation {
    std::size_t d = 0;
    std::vector<float> rows;                 // d x d, row i = component r_i
    std::vector<double> explained_variance;  // eigenvalues, non-increasing

    std::span<const float> row(std::size_t i) const { return {rows.data() + i * d, d}; }
};

// Eigendecomposition of the mean-centered sample covariance.
// Requires n >= 2 and finite data.
Rotation pca(const VectorDataset& ds);

// out[i][j] = <r_j, x_i> for j < n_dims. Requires 1 <= n_dims <= d.
VectorDataset project(const Rotation& rot, std::size_t n_dims, const VectorDataset& in);

// Inverse of project for coords with k <= d columns; missing coordinates are
// treated as zero. Returns n x d.
VectorDataset back_project(const Rotation& rot, const VectorDataset& coords);

inline double dot(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

inline double sq_norm(std::span<const float> a) { return dot(a, a); }

inline double sq_l2(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw std::invalid_argument("sq_l2: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += diff * diff;
    }
    return s;
}

namespace detail {

// Unvalidated kernels for hot loops.
inline double sq_l2_unchecked(const float* a, const float* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += diff * diff;
    }
    return s;
}

}  // namespace detail

// gram[i*b.n + j] = <A_i, B_j>.
std::vector<double> gram(const VectorDataset& a, const VectorDataset& b);

}  // namespace avq
