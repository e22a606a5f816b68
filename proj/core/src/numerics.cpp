#include "avq/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "avq/parallel.hpp"

namespace avq {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Column c of `vecs`
// holds the eigenvector of eigenvalue vals[c]. Deterministic sweep order.
void jacobi_eigen(std::vector<double>& a, std::size_t d, std::vector<double>& vals,
                  std::vector<double>& vecs) {
    vecs.assign(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) vecs[i * d + i] = 1.0;

    auto at = [&](std::size_t r, std::size_t c) -> double& { return a[r * d + c]; };

    double frob = 0.0;
    for (double v : a) frob += v * v;
    const double stop = 1e-24 * std::max(frob, 1e-300);

    constexpr int kMaxSweeps = 64;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) off += at(p, q) * at(p, q);
        }
        if (off * 2.0 <= stop) break;

        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = at(p, q);
                if (apq == 0.0) continue;
                const double tau = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (std::size_t i = 0; i < d; ++i) {
                    const double aip = at(i, p);
                    const double aiq = at(i, q);
                    at(i, p) = c * aip - s * aiq;
                    at(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double api = at(p, i);
                    const double aqi = at(q, i);
                    at(p, i) = c * api - s * aqi;
                    at(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double vip = vecs[i * d + p];
                    const double viq = vecs[i * d + q];
                    vecs[i * d + p] = c * vip - s * viq;
                    vecs[i * d + q] = s * vip + c * viq;
                }
            }
        }
    }

    vals.resize(d);
    for (std::size_t i = 0; i < d; ++i) vals[i] = at(i, i);
}

}  // namespace

Rotation pca(const VectorDataset& ds) {
    if (ds.n < 2) throw std::invalid_argument("pca: need at least 2 vectors");
    if (ds.d < 1) throw std::invalid_argument("pca: need d >= 1");
    check_finite(ds);

    const std::size_t d = ds.d;
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < ds.n; ++i) {
        const float* x = ds.row(i).data();
        for (std::size_t j = 0; j < d; ++j) mean[j] += x[j];
    }
    for (double& m : mean) m /= static_cast<double>(ds.n);

    std::vector<double> cov(d * d, 0.0);
    std::vector<double> centered(d);
    for (std::size_t i = 0; i < ds.n; ++i) {
        const float* x = ds.row(i).data();
        for (std::size_t j = 0; j < d; ++j) centered[j] = x[j] - mean[j];
        for (std::size_t r = 0; r < d; ++r) {
            const double cr = centered[r];
            double* row = cov.data() + r * d;
            for (std::size_t c = r; c < d; ++c) row[c] += cr * centered[c];
        }
    }
    const double scale = 1.0 / static_cast<double>(ds.n - 1);
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = r; c < d; ++c) {
            cov[r * d + c] *= scale;
            cov[c * d + r] = cov[r * d + c];
        }
    }

    std::vector<double> vals;
    std::vector<double> vecs;
    jacobi_eigen(cov, d, vals, vecs);

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });

    Rotation rot;
    rot.d = d;
    rot.rows.resize(d * d);
    rot.explained_variance.resize(d);
    for (std::size_t r = 0; r < d; ++r) {
        const std::size_t src = order[r];
        rot.explained_variance[r] = std::max(vals[src], 0.0);
        // Sign convention: the entry of largest magnitude is positive.
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double v = std::abs(vecs[j * d + src]);
            if (v > best) {
                best = v;
                arg = j;
            }
        }
        const double sign = vecs[arg * d + src] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            rot.rows[r * d + j] = static_cast<float>(sign * vecs[j * d + src]);
        }
    }
    return rot;
}

VectorDataset project(const Rotation& rot, std::size_t n_dims, const VectorDataset& in) {
    if (n_dims < 1 || n_dims > rot.d) {
        throw std::invalid_argument("project: n_dims out of range");
    }
    if (in.d != rot.d) throw std::invalid_argument("project: dimension mismatch");

    VectorDataset out(in.n, n_dims);
    parallel_for(in.n, [&](std::size_t i) {
        const float* x = in.row(i).data();
        float* y = out.row(i).data();
        for (std::size_t j = 0; j < n_dims; ++j) {
            const float* r = rot.rows.data() + j * rot.d;
            double s = 0.0;
            for (std::size_t c = 0; c < rot.d; ++c) s += static_cast<double>(r[c]) * x[c];
            y[j] = static_cast<float>(s);
        }
    });
    return out;
}

VectorDataset back_project(const Rotation& rot, const VectorDataset& coords) {
    if (coords.d < 1 || coords.d > rot.d) {
        throw std::invalid_argument("back_project: coordinate count out of range");
    }
    VectorDataset out(coords.n, rot.d);
    parallel_for(coords.n, [&](std::size_t i) {
        const float* y = coords.row(i).data();
        float* x = out.row(i).data();
        std::vector<double> acc(rot.d, 0.0);
        for (std::size_t j = 0; j < coords.d; ++j) {
            const float* r = rot.rows.data() + j * rot.d;
            const double yj = y[j];
            for (std::size_t c = 0; c < rot.d; ++c) acc[c] += yj * r[c];
        }
        for (std::size_t c = 0; c < rot.d; ++c) x[c] = static_cast<float>(acc[c]);
    });
    return out;
}

std::vector<double> gram(const VectorDataset& a, const VectorDataset& b) {
    if (a.d != b.d) throw std::invalid_argument("gram: dimension mismatch");
    std::vector<double> out(a.n * b.n, 0.0);
    parallel_for(a.n, [&](std::size_t i) {
        for (std::size_t j = 0; j < b.n; ++j) {
            out[i * b.n + j] = dot(a.row(i), b.row(j));
        }
    });
    return out;
}

}  // namespace avq
