#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include "avq/codebook.hpp"
#include "avq/dataset.hpp"
#include "avq/parallel.hpp"
#include "avq/rng.hpp"

namespace testutil {

// Unique scratch directory, removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<unsigned> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("avq_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

// Restores the global worker cap on scope exit.
struct ThreadGuard {
    ~ThreadGuard() { avq::set_max_threads(0); }
};

inline avq::VectorDataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed,
                                         double scale = 1.0) {
    avq::Rng rng(seed);
    avq::VectorDataset ds(n, d);
    for (float& v : ds.data) v = static_cast<float>(scale * rng.normal());
    return ds;
}

// Random codebook with per-dictionary scale decay; sorted and tagged when
// `sorted` is set.
inline avq::Codebook random_codebook(std::size_t m, std::size_t k, std::size_t d,
                                     std::uint64_t seed, bool sorted = true) {
    avq::Rng rng(seed);
    avq::Codebook cb(m, k, d);
    for (std::size_t dict = 0; dict < m; ++dict) {
        const double scale = 1.0 / static_cast<double>(1 + dict);
        for (std::size_t j = 0; j < k; ++j) {
            for (float& v : cb.element(dict, j)) {
                v = static_cast<float>(scale * rng.normal());
            }
        }
    }
    if (sorted) avq::sort_by_norm(cb);
    return cb;
}

inline double residual_sq_norm(std::span<const float> x, const avq::Codebook& cb,
                               const std::vector<avq::code_t>& codes) {
    const std::vector<float> recon = avq::reconstruct(cb, codes);
    double err = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double diff = static_cast<double>(x[j]) - recon[j];
        err += diff * diff;
    }
    return err;
}

// Gaussian mixture with a geometric per-dimension scale decay from s_max to
// s_min, mimicking the spectrum of image descriptors. Residual stages of RVQ
// stay anisotropic on such data, which is where subspace-grown annealing has
// room to work.
inline avq::VectorDataset aniso_gmm(std::size_t n, std::size_t d, std::size_t comps,
                                    double s_max, double s_min, std::uint64_t seed) {
    avq::Rng rng(seed);
    std::vector<double> scale(d);
    for (std::size_t j = 0; j < d; ++j) {
        scale[j] = s_max * std::pow(s_min / s_max,
                                    static_cast<double>(j) / static_cast<double>(d - 1));
    }
    avq::VectorDataset means(comps, d);
    for (std::size_t c = 0; c < comps; ++c) {
        for (std::size_t j = 0; j < d; ++j) {
            means.row(c)[j] = static_cast<float>(4.0 * scale[j] * rng.normal());
        }
    }
    avq::VectorDataset ds(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng.index(comps);
        for (std::size_t j = 0; j < d; ++j) {
            ds.row(i)[j] = static_cast<float>(means.row(c)[j] + scale[j] * rng.normal());
        }
    }
    return ds;
}

// Residual-like data with a planted 1-d structure: k discrete levels along
// dimension 0, drowned in isotropic noise whose total energy dominates the
// levels while every single noise dimension stays below them. Full-space
// k-means chases the noise; a 1-d projection isolates the levels.
inline avq::VectorDataset planted_residual_1d(std::size_t n, std::size_t d, std::size_t k,
                                              std::uint64_t seed) {
    avq::Rng rng(seed);
    const double delta = 6.0;
    const double sigma = 7.0;
    avq::VectorDataset ds(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        float* x = ds.row(i).data();
        const double level = (static_cast<double>(rng.index(k)) -
                              (static_cast<double>(k) - 1.0) / 2.0) *
                             delta;
        x[0] = static_cast<float>(level + 0.05 * rng.normal());
        for (std::size_t j = 1; j < d; ++j) {
            x[j] = static_cast<float>(sigma * rng.normal());
        }
    }
    return ds;
}

// Two well-separated scales: k coarse clusters at scale ~300 carrying a
// shared fine level structure along dimension 0, plus two-shell noise whose
// heavy shell only occurs in even coarse clusters. Stage-1 k-means nails the
// coarse clusters; stage-2 k-means++ seeds chase the rare heavy-noise shell
// and collapse most of the mass into one or two cells.
inline avq::VectorDataset planted_two_scale(std::size_t n, std::size_t d, std::size_t k,
                                            std::uint64_t seed) {
    avq::Rng rng(seed);
    avq::VectorDataset coarse(k, d);
    for (float& v : coarse.data) v = static_cast<float>(300.0 * rng.normal());

    const double delta = 6.0;
    avq::VectorDataset ds(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng.index(k);
        const double p_out = (c % 2 == 0) ? 0.12 : 0.0;
        const double sigma = rng.uniform() < p_out ? 35.0 : 1.0;
        const double level = (static_cast<double>(rng.index(k)) -
                              (static_cast<double>(k) - 1.0) / 2.0) *
                             delta;
        float* x = ds.row(i).data();
        const float* mu = coarse.row(c).data();
        x[0] = static_cast<float>(mu[0] + level + 0.05 * rng.normal());
        for (std::size_t j = 1; j < d; ++j) {
            x[j] = static_cast<float>(mu[j] + sigma * rng.normal());
        }
    }
    return ds;
}

}  // namespace testutil
